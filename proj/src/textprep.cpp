#include "involve/textprep.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <unordered_set>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "involve/errors.h"
#include "lemmatizer.h"

namespace involve {

namespace {

constexpr const char* kNormalizerId = "icu-nfc+typo-fold/1";
constexpr const char* kSplitterId = "rule-abbrev-splitter/1";
constexpr const char* kLemmatizerId = "involve-lemma/1";
constexpr const char* kStopListId = "nltk-english-179";

// NLTK English stop-word list (179 entries).
const std::unordered_set<std::string>& stop_words() {
    static const std::unordered_set<std::string> words = {
        "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're",
        "you've", "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he",
        "him", "his", "himself", "she", "she's", "her", "hers", "herself", "it", "it's",
        "its", "itself", "they", "them", "their", "theirs", "themselves", "what",
        "which", "who", "whom", "this", "that", "that'll", "these", "those", "am", "is",
        "are", "was", "were", "be", "been", "being", "have", "has", "had", "having",
        "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
        "because", "as", "until", "while", "of", "at", "by", "for", "with", "about",
        "against", "between", "into", "through", "during", "before", "after", "above",
        "below", "to", "from", "up", "down", "in", "out", "on", "off", "over", "under",
        "again", "further", "then", "once", "here", "there", "when", "where", "why",
        "how", "all", "any", "both", "each", "few", "more", "most", "other", "some",
        "such", "no", "nor", "not", "only", "own", "same", "so", "than", "too", "very",
        "s", "t", "can", "will", "just", "don", "don't", "should", "should've", "now",
        "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn",
        "couldn't", "didn", "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn",
        "hasn't", "haven", "haven't", "isn", "isn't", "ma", "mightn", "mightn't",
        "mustn", "mustn't", "needn", "needn't", "shan", "shan't", "shouldn",
        "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn",
        "wouldn't"};
    return words;
}

// Tokens that end with a period without ending the sentence.
const std::unordered_set<std::string>& abbreviations() {
    static const std::unordered_set<std::string> abbrevs = {
        "e.g", "i.e", "al", "fig", "figs", "eq", "eqs", "dr", "mr", "mrs", "ms",
        "prof", "vs", "cf", "approx", "no", "vol", "sec", "ref", "refs", "resp",
        "st", "jr", "sr", "inc", "ltd", "co", "u.s", "viz", "ca", "ch", "pp"};
    return abbrevs;
}

UChar32 fold_codepoint(UChar32 c) {
    switch (c) {
        case 0x2018: case 0x2019: case 0x201A: case 0x201B: case 0x2032:
            return '\'';
        case 0x201C: case 0x201D: case 0x201E: case 0x201F: case 0x2033:
            return '"';
        case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2014:
        case 0x2015: case 0x2212:
            return '-';
        case 0x00A0: case 0x202F: case 0x205F: case 0x3000:
            return ' ';
        default:
            break;
    }
    if (c >= 0x2000 && c <= 0x200A) return ' ';
    return c;
}

struct Decoded {
    UChar32 cp;
    std::size_t next;
};

Decoded decode_at(std::string_view s, std::size_t i) {
    int32_t pos = static_cast<int32_t>(i);
    UChar32 c;
    U8_NEXT(reinterpret_cast<const uint8_t*>(s.data()), pos, static_cast<int32_t>(s.size()), c);
    if (c < 0) c = 0xFFFD;
    return {c, static_cast<std::size_t>(pos)};
}

bool is_space_cp(UChar32 c) { return u_isUWhiteSpace(c) != 0; }
bool is_alnum_cp(UChar32 c) { return u_isalnum(c) != 0; }

bool is_space_byte(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string unicode_lower(std::string_view s) {
    bool ascii = std::all_of(s.begin(), s.end(),
                             [](char c) { return static_cast<unsigned char>(c) < 0x80; });
    if (ascii) return ascii_lower(s);
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(
        icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    u.toLower(icu::Locale::getRoot());
    std::string out;
    u.toUTF8String(out);
    return out;
}

}  // namespace

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

PreprocConfig current_preproc_config() {
    return {kNormalizerId, kSplitterId, kLemmatizerId, kStopListId};
}

nlohmann::json to_json(const PreprocConfig& config) {
    return {{"normalizer", config.normalizer},
            {"sentence_splitter", config.sentence_splitter},
            {"lemmatizer", config.lemmatizer},
            {"stop_list", config.stop_list}};
}

PreprocConfig preproc_config_from_json(const nlohmann::json& j) {
    return {j.at("normalizer").get<std::string>(), j.at("sentence_splitter").get<std::string>(),
            j.at("lemmatizer").get<std::string>(), j.at("stop_list").get<std::string>()};
}

bool is_stop_word(std::string_view lowercase_word) {
    return stop_words().count(std::string(lowercase_word)) > 0;
}

std::string normalize_text(std::string_view text) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(
        icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    icu::UnicodeString composed = U_SUCCESS(status) ? nfc->normalize(u, status) : u;
    if (U_FAILURE(status)) composed = u;

    icu::UnicodeString folded;
    for (int32_t i = 0; i < composed.length();) {
        UChar32 c = composed.char32At(i);
        i += U16_LENGTH(c);
        if (c == 0x2026) {
            folded.append(icu::UnicodeString("..."));
            continue;
        }
        if (c == 0x200B || c == 0xFEFF) continue;
        folded.append(fold_codepoint(c));
    }
    std::string out;
    folded.toUTF8String(out);
    return out;
}

std::vector<Sentence> split_sentences(std::string_view raw) {
    const std::string text = normalize_text(raw);
    const std::size_t n = text.size();

    auto skip_space = [&](std::size_t i) {
        while (i < n && is_space_byte(text[i])) ++i;
        return i;
    };

    std::vector<Sentence> sentences;
    auto emit = [&](std::size_t start, std::size_t end) {
        while (end > start && is_space_byte(text[end - 1])) --end;
        if (end <= start) return;
        sentences.push_back({text.substr(start, end - start), sentences.size(), {start, end}});
    };

    // Word immediately preceding position `dot` (exclusive), lowercased.
    auto word_before = [&](std::size_t dot) {
        std::size_t b = dot;
        while (b > 0 && !is_space_byte(text[b - 1]) && text[b - 1] != '(' && text[b - 1] != '"')
            --b;
        return ascii_lower(std::string_view(text).substr(b, dot - b));
    };

    std::size_t start = skip_space(0);
    if (start >= n) throw EmptyDocument("document has no non-whitespace content");

    std::size_t i = start;
    while (i < n) {
        char c = text[i];
        // Blank line always terminates a sentence.
        if (c == '\n') {
            std::size_t j = i + 1;
            while (j < n && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r')) ++j;
            if (j < n && text[j] == '\n') {
                emit(start, i);
                start = skip_space(j);
                i = start;
                continue;
            }
        }
        if (c != '.' && c != '!' && c != '?') {
            ++i;
            continue;
        }
        std::size_t term = i;
        std::size_t j = i + 1;
        while (j < n && (text[j] == '.' || text[j] == '!' || text[j] == '?')) ++j;
        while (j < n && (text[j] == '"' || text[j] == '\'' || text[j] == ')' || text[j] == ']'))
            ++j;
        if (j < n && !is_space_byte(text[j])) {
            i = j;
            continue;
        }
        std::size_t next = skip_space(j);
        bool boundary = true;
        if (c == '.' && j == term + 1) {
            std::string prev = word_before(term);
            if (abbreviations().count(prev) > 0) boundary = false;
            if (prev.size() == 1 && std::isalpha(static_cast<unsigned char>(prev[0])))
                boundary = false;
            // Dotted initialisms such as "u.s" or "a.k.a"; numbers like "2.0" still end.
            if (prev.find('.') != std::string::npos &&
                std::all_of(prev.begin(), prev.end(), [](char ch) {
                    return ch == '.' || std::isalpha(static_cast<unsigned char>(ch));
                })) {
                boundary = false;
            }
        }
        if (boundary && next < n) {
            Decoded d = decode_at(text, next);
            bool opener = d.cp == '"' || d.cp == '\'' || d.cp == '(' || d.cp == '[';
            bool upper_or_digit = u_isupper(d.cp) || u_isdigit(d.cp) || u_istitle(d.cp);
            if (!opener && !upper_or_digit) boundary = false;
        }
        if (boundary) {
            emit(start, j);
            start = next;
        }
        i = j;
    }
    if (start < n) emit(start, n);
    if (sentences.empty()) throw EmptyDocument("document has no non-whitespace content");
    return sentences;
}

std::vector<AnalyzedToken> analyze_tokens(std::string_view raw) {
    std::vector<AnalyzedToken> tokens;
    if (raw.empty()) return tokens;
    const std::string text = normalize_text(raw);
    const std::size_t n = text.size();

    std::size_t i = 0;
    while (i < n) {
        Decoded d = decode_at(text, i);
        if (is_space_cp(d.cp)) {
            i = d.next;
            continue;
        }
        AnalyzedToken tok;
        std::size_t start = i;
        if (is_alnum_cp(d.cp)) {
            std::size_t j = d.next;
            bool prev_digit = u_isdigit(d.cp) != 0;
            while (j < n) {
                Decoded e = decode_at(text, j);
                if (is_alnum_cp(e.cp)) {
                    prev_digit = u_isdigit(e.cp) != 0;
                    j = e.next;
                    continue;
                }
                // Keep decimal and thousands separators inside numbers.
                if ((e.cp == '.' || e.cp == ',') && prev_digit && e.next < n) {
                    Decoded f = decode_at(text, e.next);
                    if (u_isdigit(f.cp)) {
                        j = e.next;
                        continue;
                    }
                }
                break;
            }
            tok.surface = text.substr(start, j - start);
            tok.lemma = lemmatize(tok.surface);
            std::string lower = unicode_lower(tok.surface);
            tok.is_stop = is_stop_word(lower) || is_stop_word(tok.lemma);
            tok.is_punct = false;
            tok.char_span = {start, j};
            i = j;
        } else {
            tok.surface = text.substr(start, d.next - start);
            tok.lemma = unicode_lower(tok.surface);
            tok.is_stop = false;
            tok.is_punct = true;
            tok.char_span = {start, d.next};
            i = d.next;
        }
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

std::string lemmatize(std::string_view word) { return detail::lemmatize_lowercase(unicode_lower(word)); }

}  // namespace involve
