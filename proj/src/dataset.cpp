#include "involve/dataset.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "involve/errors.h"

namespace involve {

namespace {

struct TemplateEntry {
    TemplateVariant variant;
    std::string_view name;
    std::string_view text;
};

constexpr std::array<TemplateEntry, 4> kTemplates = {{
    {TemplateVariant::kDirect, "direct", "Write an abstract on the basis of {X}"},
    {TemplateVariant::kStudent, "student",
     "I am a college student and have already finished part of an abstract about {X}. "
     "Please complete the abstract."},
    {TemplateVariant::kDual, "dual",
     "Revise {X} and then write an abstract based on the revised text."},
    {TemplateVariant::kSummarization, "summarization",
     "Find five abstracts about {X} and write a new academic abstract."},
}};

const TemplateEntry& entry(TemplateVariant v) {
    for (const auto& e : kTemplates) {
        if (e.variant == v) return e;
    }
    throw ConfigError("unknown template variant");
}

struct TemplateParts {
    std::string_view prefix;
    std::string_view suffix;
};

TemplateParts split_template(std::string_view text) {
    auto pos = text.find("{X}");
    return {text.substr(0, pos), text.substr(pos + 3)};
}

bool ends_sentence(std::string_view s) {
    return !s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?');
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::string_view template_text(TemplateVariant v) { return entry(v).text; }
std::string_view template_name(TemplateVariant v) { return entry(v).name; }

TemplateVariant parse_template(std::string_view name) {
    for (const auto& e : kTemplates) {
        if (e.name == name) return e.variant;
    }
    throw ConfigError("unknown template '" + std::string(name) +
                      "' (expected direct|student|dual|summarization)");
}

std::vector<TemplateVariant> all_templates() {
    std::vector<TemplateVariant> out;
    for (const auto& e : kTemplates) out.push_back(e.variant);
    return out;
}

std::string render_prompt(TemplateVariant v, std::string_view content) {
    auto [prefix, suffix] = split_template(template_text(v));
    std::string out(prefix);
    out += content;
    if (!suffix.empty() && suffix.front() == '.' && ends_sentence(content)) suffix.remove_prefix(1);
    out += suffix;
    return out;
}

std::optional<ExtractedPrompt> extract_prompt_content(std::string_view rendered) {
    for (const auto& e : kTemplates) {
        auto [prefix, suffix] = split_template(e.text);
        if (!rendered.starts_with(prefix)) continue;
        std::string_view rest = rendered.substr(prefix.size());
        if (rest.ends_with(suffix)) {
            return ExtractedPrompt{e.variant, std::string(rest.substr(0, rest.size() - suffix.size()))};
        }
        if (!suffix.empty() && suffix.front() == '.') {
            std::string_view short_suffix = suffix.substr(1);
            if (rest.ends_with(short_suffix)) {
                std::string_view content = rest.substr(0, rest.size() - short_suffix.size());
                if (ends_sentence(content)) return ExtractedPrompt{e.variant, std::string(content)};
            }
        }
    }
    return std::nullopt;
}

bool LabeledPair::operator==(const LabeledPair& o) const {
    auto raw_eq = [](const std::optional<RawScores>& a, const std::optional<RawScores>& b) {
        if (a.has_value() != b.has_value()) return false;
        if (!a) return true;
        return a->recall == b->recall && a->precision == b->precision && a->f1 == b->f1;
    };
    return pair_id == o.pair_id && prompt == o.prompt && generated == o.generated &&
           y_reg == o.y_reg && y_cls == o.y_cls && generator_model == o.generator_model &&
           prompt_spec == o.prompt_spec && raw_eq(raw, o.raw) && polar_class == o.polar_class &&
           preproc == o.preproc && normalization == o.normalization;
}

bool DatasetMeta::operator==(const DatasetMeta& o) const {
    return to_json(*this) == to_json(o);
}

std::string preproc_signature(const PreprocConfig& c) {
    return c.normalizer + "|" + c.sentence_splitter + "|" + c.lemmatizer + "|" + c.stop_list;
}

nlohmann::json to_json(const PromptSpec& s) {
    return {{"source_doc_id", s.source_doc_id},
            {"z", s.z},
            {"sentence_indices", s.sentence_indices},
            {"template", template_name(s.variant)},
            {"rendered", s.rendered}};
}

PromptSpec prompt_spec_from_json(const nlohmann::json& j) {
    PromptSpec s;
    s.source_doc_id = j.at("source_doc_id").get<std::string>();
    s.z = j.at("z").get<std::size_t>();
    s.sentence_indices = j.at("sentence_indices").get<std::vector<std::size_t>>();
    s.variant = parse_template(j.at("template").get<std::string>());
    s.rendered = j.at("rendered").get<std::string>();
    return s;
}

nlohmann::json to_json(const LabeledPair& p) {
    nlohmann::json j = {{"pair_id", p.pair_id},
                        {"prompt", p.prompt},
                        {"generated", p.generated},
                        {"y_reg", p.y_reg},
                        {"y_cls", to_json(p.y_cls)},
                        {"attention_len", p.y_cls.attention_len},
                        {"generator_model", p.generator_model},
                        {"preproc", p.preproc},
                        {"normalization", p.normalization}};
    j["prompt_spec"] = p.prompt_spec ? to_json(*p.prompt_spec) : nlohmann::json(nullptr);
    j["raw"] = p.raw ? to_json(*p.raw) : nlohmann::json(nullptr);
    j["polar_class"] = p.polar_class ? nlohmann::json(*p.polar_class) : nlohmann::json(nullptr);
    return j;
}

LabeledPair labeled_pair_from_json(const nlohmann::json& j, std::size_t max_len) {
    LabeledPair p;
    p.pair_id = j.at("pair_id").get<std::uint64_t>();
    p.prompt = j.at("prompt").get<std::string>();
    p.generated = j.at("generated").get<std::string>();
    p.y_reg = j.at("y_reg").get<double>();
    p.y_cls = token_labels_from_json(j.at("y_cls"), j.at("attention_len").get<std::size_t>());
    p.generator_model = j.at("generator_model").get<std::string>();
    p.preproc = j.at("preproc").get<std::string>();
    p.normalization = j.at("normalization").get<std::string>();
    if (!j.at("prompt_spec").is_null()) p.prompt_spec = prompt_spec_from_json(j["prompt_spec"]);
    if (!j.at("raw").is_null()) p.raw = raw_scores_from_json(j["raw"]);
    if (!j.at("polar_class").is_null()) p.polar_class = j["polar_class"].get<int>();
    validate(p, max_len);
    return p;
}

nlohmann::json to_json(const DatasetMeta& m) {
    nlohmann::json j = {{"format", m.format},
                        {"kind", m.kind},
                        {"seed", m.seed},
                        {"template", m.template_name},
                        {"generator_model", m.generator_model},
                        {"llm_params", m.llm_params},
                        {"embedder", m.embedder},
                        {"tokenizer", m.tokenizer},
                        {"max_len", m.max_len},
                        {"normalization", to_json(m.normalization)},
                        {"preproc", to_json(m.preproc)},
                        {"count", m.count},
                        {"failed", m.failed}};
    j["bst"] = m.bst ? nlohmann::json(*m.bst) : nlohmann::json(nullptr);
    return j;
}

DatasetMeta dataset_meta_from_json(const nlohmann::json& j) {
    DatasetMeta m;
    m.format = j.at("format").get<std::string>();
    if (m.format != "involve-dataset/1") throw FormatError("unsupported dataset format " + m.format);
    m.kind = j.at("kind").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.template_name = j.at("template").get<std::string>();
    m.generator_model = j.at("generator_model").get<std::string>();
    m.llm_params = j.at("llm_params");
    m.embedder = j.at("embedder").get<std::string>();
    m.tokenizer = j.at("tokenizer").get<std::string>();
    m.max_len = j.at("max_len").get<std::size_t>();
    m.normalization = normalization_from_json(j.at("normalization"));
    m.preproc = preproc_config_from_json(j.at("preproc"));
    m.count = j.at("count").get<std::size_t>();
    m.failed = j.at("failed").get<std::size_t>();
    if (j.contains("bst") && !j["bst"].is_null()) m.bst = j["bst"].get<double>();
    return m;
}

void validate(const LabeledPair& p, std::size_t max_len) {
    if (!(p.y_reg >= 0.0 && p.y_reg <= 1.0)) {
        throw FormatError("record " + std::to_string(p.pair_id) + ": y_reg outside [0,1]");
    }
    if (std::all_of(p.generated.begin(), p.generated.end(),
                    [](unsigned char c) { return std::isspace(c) != 0; })) {
        throw FormatError("record " + std::to_string(p.pair_id) + ": empty generated text");
    }
    validate(p.y_cls, max_len);
}

std::filesystem::path meta_path_for(const std::filesystem::path& records_path) {
    return std::filesystem::path(records_path.string() + ".meta.json");
}

std::string serialize_records(const Dataset& dataset) {
    std::string out;
    for (const auto& r : dataset.records) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

void write_dataset(const std::filesystem::path& records_path, const Dataset& dataset) {
    write_file(records_path, serialize_records(dataset));
    write_file(meta_path_for(records_path), to_json(dataset.meta).dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& records_path) {
    Dataset d;
    try {
        d.meta = dataset_meta_from_json(nlohmann::json::parse(read_file(meta_path_for(records_path))));
        std::istringstream lines(read_file(records_path));
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(lines, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                d.records.push_back(labeled_pair_from_json(nlohmann::json::parse(line), d.meta.max_len));
            } catch (const nlohmann::json::exception& e) {
                throw FormatError(records_path.string() + ":" + std::to_string(lineno) + ": " +
                                  e.what());
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(meta_path_for(records_path).string() + ": " + e.what());
    }
    return d;
}

}  // namespace involve
