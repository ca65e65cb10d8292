#include "involve/report.h"

#include <fmt/format.h>

#include "involve/errors.h"

namespace involve {

std::vector<CharSpan> label_spans(const Encoding& encoding, const TokenLabelVector& labels) {
    std::vector<CharSpan> out;
    std::size_t last_word = static_cast<std::size_t>(-1);
    const std::size_t n = std::min(encoding.attention_len, labels.labels.size());
    for (std::size_t i = 0; i < n; ++i) {
        const TokenPiece& piece = encoding.pieces[i];
        if (piece.special || labels.labels[i] == 0) continue;
        if (!out.empty() && piece.word_index == last_word && out.back().end == piece.span.start) {
            out.back().end = piece.span.end;
        } else {
            out.push_back(piece.span);
        }
        last_word = piece.word_index;
    }
    return out;
}

std::vector<AttributedSpan> segments(const std::string& text, const std::vector<CharSpan>& human) {
    std::vector<AttributedSpan> out;
    std::size_t at = 0;
    for (const CharSpan& s : human) {
        if (s.start < at || s.end > text.size() || s.start >= s.end) {
            throw FormatError("highlight spans must be sorted, disjoint and inside the text");
        }
        if (s.start > at) out.push_back({{at, s.start}, false});
        out.push_back({s, true});
        at = s.end;
    }
    if (at < text.size()) out.push_back({{at, text.size()}, false});
    return out;
}

AnalysisResult analyze_document(const detector::Detector& detector, std::string_view document,
                                const BSTConfig& bst, std::string model_id) {
    const Encoding enc = detector.tokenizer().encode(document);
    const detector::Prediction pred = detector.predict(document);
    AnalysisResult r;
    r.text = enc.text;
    r.involvement = pred.involvement;
    r.y_reg_hat = pred.y_reg_hat;
    r.token_labels = pred.token_labels;
    r.human_spans = label_spans(enc, pred.token_labels);
    r.bst = bst.threshold();
    r.verdict = binarize(pred.involvement, bst);
    r.model_id = std::move(model_id);
    r.encoder = detector.config().encoder;
    r.tokenizer = detector.tokenizer().id();
    return r;
}

std::string html_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string render_html(const AnalysisResult& r) {
    std::string body;
    for (const AttributedSpan& seg : segments(r.text, r.human_spans)) {
        body += fmt::format("<span class=\"{}\">{}</span>", seg.human ? "human" : "machine",
                            html_escape(std::string_view(r.text).substr(
                                seg.span.start, seg.span.end - seg.span.start)));
    }
    return fmt::format(
        "<!DOCTYPE html>\n"
        "<html lang=\"en\">\n"
        "<head>\n"
        "<meta charset=\"utf-8\">\n"
        "<title>Human involvement report</title>\n"
        "<style>\n"
        "body {{ font-family: Georgia, serif; max-width: 48em; margin: 2em auto; line-height: 1.6; }}\n"
        ".summary {{ border: 1px solid #999; padding: 0.6em 1em; margin-bottom: 1.5em; }}\n"
        ".document {{ white-space: pre-wrap; }}\n"
        ".machine {{ color: #444; }}\n"
        ".human {{ background: #ffd966; color: #000; }}\n"
        "</style>\n"
        "</head>\n"
        "<body>\n"
        "<div class=\"summary\">\n"
        "<h1>Human involvement report</h1>\n"
        "<p>Involvement estimate: <strong>{:.4f}</strong></p>\n"
        "<p>Threshold: {:g} &rarr; verdict: <strong>{}</strong></p>\n"
        "<p>Model: {} ({}, {})</p>\n"
        "<p><span class=\"human\">Highlighted</span> words are attributed to the human-written prompt.</p>\n"
        "</div>\n"
        "<div class=\"document\">{}</div>\n"
        "</body>\n"
        "</html>\n",
        r.involvement, r.bst, verdict_name(r.verdict), html_escape(r.model_id),
        html_escape(r.encoder), html_escape(r.tokenizer), body);
}

nlohmann::json to_json(const AnalysisResult& r) {
    nlohmann::json spans = nlohmann::json::array();
    for (const CharSpan& s : r.human_spans) {
        spans.push_back({{"start", s.start},
                         {"end", s.end},
                         {"text", r.text.substr(s.start, s.end - s.start)}});
    }
    return {{"involvement", r.involvement},
            {"y_reg_hat", r.y_reg_hat},
            {"bst", r.bst},
            {"verdict", std::string(verdict_name(r.verdict))},
            {"human_spans", spans},
            {"attention_len", r.token_labels.attention_len},
            {"model", r.model_id},
            {"encoder", r.encoder},
            {"tokenizer", r.tokenizer}};
}

}  // namespace involve
