// Dictionary-backed suffix lemmatizer for English.
//
// Lookup order: irregular forms, protected words, then inflectional suffix
// rules (-ies, -es, -s, -ied, -ed, -ing). After stripping -ed/-ing a final
// "e" is restored when the stem is a known e-final verb or matches one of a
// few orthographic patterns, and doubled final consonants are undone.

#include "lemmatizer.h"

#include <string>
#include <unordered_map>
#include <unordered_set>

namespace involve::detail {

namespace {

const std::unordered_map<std::string, std::string>& irregular_forms() {
    static const std::unordered_map<std::string, std::string> forms = {
        {"am", "be"}, {"is", "be"}, {"are", "be"}, {"was", "be"}, {"were", "be"},
        {"been", "be"}, {"being", "be"}, {"has", "have"}, {"had", "have"},
        {"having", "have"}, {"does", "do"}, {"did", "do"}, {"done", "do"},
        {"doing", "do"}, {"went", "go"}, {"gone", "go"}, {"goes", "go"},
        {"made", "make"}, {"took", "take"}, {"taken", "take"}, {"gave", "give"},
        {"given", "give"}, {"got", "get"}, {"gotten", "get"}, {"found", "find"},
        {"shown", "show"}, {"known", "know"}, {"knew", "know"}, {"seen", "see"},
        {"saw", "see"}, {"written", "write"}, {"wrote", "write"}, {"ran", "run"},
        {"began", "begin"}, {"begun", "begin"}, {"brought", "bring"}, {"built", "build"},
        {"thought", "think"}, {"led", "lead"}, {"left", "leave"}, {"held", "hold"},
        {"kept", "keep"}, {"said", "say"}, {"told", "tell"}, {"became", "become"},
        {"chose", "choose"}, {"chosen", "choose"}, {"drew", "draw"}, {"drawn", "draw"},
        {"fell", "fall"}, {"fallen", "fall"}, {"felt", "feel"}, {"grew", "grow"},
        {"grown", "grow"}, {"meant", "mean"}, {"met", "meet"}, {"paid", "pay"},
        {"sent", "send"}, {"spent", "spend"}, {"stood", "stand"}, {"taught", "teach"},
        {"understood", "understand"}, {"sought", "seek"}, {"caught", "catch"},
        {"bought", "buy"}, {"lost", "lose"}, {"won", "win"}, {"ridden", "ride"},
        {"arose", "arise"}, {"arisen", "arise"}, {"undertaken", "undertake"},
        {"overcame", "overcome"}, {"children", "child"}, {"men", "man"},
        {"women", "woman"}, {"mice", "mouse"}, {"feet", "foot"}, {"teeth", "tooth"},
        {"criteria", "criterion"}, {"phenomena", "phenomenon"}, {"analyses", "analysis"},
        {"hypotheses", "hypothesis"}, {"theses", "thesis"}, {"syntheses", "synthesis"},
        {"indices", "index"}, {"matrices", "matrix"}, {"vertices", "vertex"},
        {"appendices", "appendix"}, {"axes", "axis"}, {"lives", "life"},
        {"leaves", "leaf"}, {"modelling", "model"}, {"modelled", "model"},
        {"labelling", "label"}, {"labelled", "label"}, {"travelled", "travel"},
        {"signalling", "signal"}, {"cancelled", "cancel"}, {"controlled", "control"},
        {"controlling", "control"}, {"caches", "cache"}, {"biases", "bias"}, {"used", "use"}, {"uses", "use"},
        {"using", "use"}, {"better", "better"}, {"best", "best"}};
    return forms;
}

// Words whose trailing s / ed / ing is not inflectional.
const std::unordered_set<std::string>& protected_words() {
    static const std::unordered_set<std::string> words = {
        "always", "perhaps", "whereas", "thus", "news", "physics", "mathematics",
        "economics", "linguistics", "series", "species", "lens", "plus", "besides",
        "sometimes", "analysis", "basis", "thesis", "hypothesis", "synthesis", "bias",
        "corpus", "focus", "consensus", "status", "various", "previous", "this", "its",
        "his", "us", "yes", "gas", "bus", "during", "thing", "things", "string",
        "strings", "bring", "king", "morning", "spring", "nothing", "something",
        "everything", "anything", "sing", "ring", "wing", "ceiling", "evening",
        "need", "proceed", "exceed", "succeed", "feed", "seed", "speed", "embed",
        "shed", "hundred", "bed", "red", "bred", "indeed", "united", "sacred",
        "naked", "wicked", "kindred", "ed", "ing", "less", "unless", "across",
        "process", "access", "success", "class", "glass", "mass", "pass", "loss",
        "boss", "cross", "gross", "press", "stress", "address", "progress",
        "express", "chaos", "ethos", "pathos", "atlas", "canvas", "alias", "christmas",
        "virus", "census", "genus", "bonus", "campus", "nexus", "radius", "apparatus",
        "stimulus", "syllabus", "calculus", "numerous", "famous", "obvious", "serious",
        "nervous", "ambiguous", "continuous", "anonymous", "autonomous", "heterogeneous",
        "homogeneous", "simultaneous", "spontaneous", "miscellaneous", "vs", "ethics",
        "statistics", "semantics", "robotics", "genomics", "analytics", "dynamics",
        "graphics", "kinetics", "electronics", "acoustics", "logistics", "metrics"};
    return words;
}

// E-final verbs whose -ed / -ing forms lose the e.
const std::unordered_set<std::string>& e_final_stems() {
    static const std::unordered_set<std::string> stems = {
        "us", "bas", "caus", "paus", "rais", "prais", "advis", "revis", "supervis",
        "devis", "compris", "surpris", "exercis", "promis", "releas", "increas",
        "decreas", "pleas", "eas", "ceas", "phas", "eras", "purchas", "ris", "aris",
        "choos", "los", "close", "clos", "expos", "compos", "impos", "propos", "suppos",
        "oppos", "dispos", "purpos", "refus", "confus", "excus", "fus", "diffus",
        "abus", "brows", "paraphras", "rephras", "phras", "chang", "challeng", "rang",
        "arrang", "merg", "emerg", "converg", "diverg", "engag", "manag", "leverag",
        "averag", "judg", "acknowledg", "exchang", "encourag", "damag", "stag",
        "mak", "tak", "giv", "com", "becom", "overcom", "welcom", "assum", "consum",
        "resum", "presum", "nam", "fram", "tim", "prim", "scor", "stor", "restor",
        "ignor", "explor", "compar", "prepar", "declar", "shar", "car", "acquir",
        "requir", "inspir", "desir", "hir", "retir", "cod", "encod", "decod", "explod",
        "provid", "divid", "guid", "decid", "overrid", "collid", "hop", "scop", "cop",
        "typ", "prototyp", "pip", "wip", "shap", "escap", "writ", "not", "vot", "quot",
        "promot", "devot", "complet", "compet", "delet", "execut", "contribut",
        "distribut", "attribut", "constitut", "substitut", "dilut", "updat", "stat",
        "rat", "relat", "locat", "translat", "creat", "isolat", "lin", "fin", "refin",
        "defin", "combin", "declin", "outlin", "underlin", "streamlin", "examin",
        "determin", "imagin", "min", "shin", "tun", "prun", "comput", "zon", "ton",
        "clon", "phon", "serv", "observ", "preserv", "reserv", "deserv", "conserv",
        "curv", "solv", "evolv", "involv", "resolv", "revolv", "dissolv", "believ",
        "reliev", "achiev", "perceiv", "receiv", "conceiv", "deceiv", "retriev", "mov",
        "prov", "improv", "approv", "remov", "driv", "deriv", "arriv", "surviv",
        "reviv", "thriv", "striv", "depriv", "liv", "forgiv", "sav", "behav", "wav",
        "argu", "continu", "valu", "issu", "pursu", "rescu", "queu", "glu", "tru",
        "rul", "schedul", "scal", "fil", "compil", "styl", "smil", "reconcil", "til",
        "whil", "mil", "pil", "tackl", "settl", "enabl", "disabl", "sampl", "handl",
        "coupl", "bundl", "struggl", "shuffl", "scrambl", "assembl", "resembl",
        "doubl", "troubl", "puzzl", "juggl", "cycl", "recycl", "titl", "entitl",
        "tangl", "singl", "mingl", "wrestl", "simpl", "tripl", "examin", "captur",
        "measur", "structur", "featur", "figur", "configur", "ensur", "secur", "cur",
        "procur", "endur", "matur", "pictur", "ventur", "fractur", "manufactur",
        "produc", "introduc", "reduc", "induc", "deduc", "enhanc", "balanc", "advanc",
        "replac", "plac", "trac", "fac", "forc", "influenc", "practic", "notic",
        "evidenc", "sequenc", "referenc", "experienc", "sentenc", "convinc", "danc",
        "pronounc", "announc", "bounc", "commenc", "slic", "splic", "pric", "voic",
        "sourc", "resourc", "divorc", "reinforc", "analyz", "utiliz", "organiz",
        "recogniz", "optimiz", "minimiz", "maximiz", "normaliz", "tokeniz",
        "characteriz", "categoriz", "emphasiz", "realiz", "finaliz", "generaliz",
        "summariz", "visualiz", "initializ", "serializ", "regulariz", "parameteriz",
        "standardiz", "prioritiz", "synthesiz", "hypothesiz", "specializ", "localiz",
        "lemmatiz", "memoriz", "vectoriz", "personaliz", "criticiz", "analys",
        "utilis", "organis", "recognis", "optimis", "minimis", "maximis", "normalis",
        "emphasis", "realis", "generalis", "summaris", "visualis", "bak", "wak",
        "lik", "strik", "hik", "invok", "evok", "provok", "smok", "spok", "jok",
        "fak", "rak", "shak", "snak", "tim", "glid", "slid", "rid", "sid",
        "abid", "transcrib", "describ", "subscrib", "prescrib", "ascrib", "inscrib",
        "brib", "tub", "cub", "prob", "rob", "lob", "pag", "wag",
        "rag", "cag", "gaug", "oblig", "dispens", "licens", "sens", "condens", "rins",
        "cleans", "laps", "collaps", "elaps", "rins", "pars", "travers",
        "revers", "convers", "immers", "dispers", "endors", "nurs", "purs", "cours",
        "hous", "rous", "arous", "spous", "mous", "dous", "tast", "wast", "past", "pac", "rac", "lac", "grac", "spac", "embrac", "erac", "twin",
        "whin", "din", "pin", "spin", "rout"};
    return stems;
}

bool is_vowel(char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

bool has_vowel(const std::string& s) {
    for (char c : s) {
        if (is_vowel(c) || c == 'y') return true;
    }
    return false;
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_ascii_word(std::string_view w) {
    for (char c : w) {
        if (!(c >= 'a' && c <= 'z')) return false;
    }
    return true;
}

// Restores the base form of a stem left after removing -ed or -ing.
std::string restore_stem(std::string stem) {
    if (e_final_stems().count(stem) > 0) return stem + "e";
    std::size_t n = stem.size();
    if (n >= 2) {
        char last = stem[n - 1];
        char prev = stem[n - 2];
        // Doubled final consonant: running -> run, planned -> plan.
        if (n >= 4 && last == prev && !is_vowel(last) && last != 'l' && last != 's' &&
            last != 'z' && last != 'f') {
            return stem.substr(0, n - 1);
        }
        if (last == 'v') return stem + "e";
        if ((last == 'z' && (prev == 'i' || prev == 'y'))) return stem + "e";
        if (last == 'l' && !is_vowel(prev) && prev != 'l' && prev != 'r' && prev != 'w' &&
            prev != 'n') {
            return stem + "e";
        }
        if (last == 'c' && (is_vowel(prev) || prev == 'n')) return stem + "e";
        if (ends_with(stem, "dg")) return stem + "e";
        if (n >= 4 && ends_with(stem, "at") && stem[n - 3] != 'e' && stem[n - 3] != 'o' &&
            stem[n - 3] != 'a') {
            return stem + "e";
        }
        if (n >= 4 && ends_with(stem, "ur") && !is_vowel(stem[n - 3])) return stem + "e";
    }
    return stem;
}

}  // namespace

std::string lemmatize_lowercase(std::string_view lower) {
    std::string w(lower);
    if (w.size() <= 2 || !is_ascii_word(w)) return w;

    if (auto it = irregular_forms().find(w); it != irregular_forms().end()) return it->second;
    if (protected_words().count(w) > 0) return w;

    if (ends_with(w, "ies") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
    if (ends_with(w, "ied") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";

    if (ends_with(w, "ing") && w.size() > 4) {
        std::string stem = w.substr(0, w.size() - 3);
        if (has_vowel(stem)) return restore_stem(stem);
        return w;
    }
    if (ends_with(w, "ed") && w.size() > 3) {
        if (ends_with(w, "eed")) return w;
        std::string stem = w.substr(0, w.size() - 2);
        if (has_vowel(stem)) return restore_stem(stem);
        return w;
    }
    if (ends_with(w, "s") && w.size() > 3) {
        if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is") ||
            ends_with(w, "ous")) {
            return w;
        }
        if (ends_with(w, "sses")) return w.substr(0, w.size() - 2);
        if (ends_with(w, "ches") || ends_with(w, "shes") || ends_with(w, "xes") ||
            ends_with(w, "zzes")) {
            return w.substr(0, w.size() - 2);
        }
        return w.substr(0, w.size() - 1);
    }
    return w;
}

}  // namespace involve::detail
