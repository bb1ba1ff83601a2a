#include "dialogxl/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "dialogxl/errors.hpp"
#include "json.hpp"

namespace dialogxl {

using nlohmann::json;

const char* label_rule_name(LabelRule r) {
    switch (r) {
        case LabelRule::local: return "local";
        case LabelRule::intra: return "intra";
        case LabelRule::inter: return "inter";
        default: return "none";
    }
}

LabelRule label_rule_from_name(const std::string& name) {
    if (name == "local") return LabelRule::local;
    if (name == "intra") return LabelRule::intra;
    if (name == "inter") return LabelRule::inter;
    if (name == "none" || name.empty()) return LabelRule::none;
    throw DataError("unknown label rule '" + name + "'");
}

Vocabulary::Vocabulary() {
    to_token_ = {"[CLS]", "[PAD]", "[UNK]"};
    to_id_ = {{"[CLS]", kCls}, {"[PAD]", kPad}, {"[UNK]", kUnk}};
}

int Vocabulary::add(const std::string& token) {
    auto it = to_id_.find(token);
    if (it != to_id_.end()) return it->second;
    const int id = static_cast<int>(to_token_.size());
    to_id_.emplace(token, id);
    to_token_.push_back(token);
    return id;
}

int Vocabulary::id(const std::string& token) const {
    auto it = to_id_.find(token);
    return it == to_id_.end() ? kUnk : it->second;
}

std::optional<int> Vocabulary::find(const std::string& token) const {
    auto it = to_id_.find(token);
    if (it == to_id_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= to_token_.size()) {
        throw DataError("vocabulary: id " + std::to_string(id) + " out of range");
    }
    return to_token_[static_cast<std::size_t>(id)];
}

int LabelSet::add(const std::string& name) {
    auto it = to_id_.find(name);
    if (it != to_id_.end()) return it->second;
    const int id = static_cast<int>(names_.size());
    to_id_.emplace(name, id);
    names_.push_back(name);
    return id;
}

int LabelSet::id(const std::string& name) const {
    auto it = to_id_.find(name);
    if (it == to_id_.end()) throw DataError("unknown label name '" + name + "'");
    return it->second;
}

std::optional<int> LabelSet::find(const std::string& name) const {
    auto it = to_id_.find(name);
    if (it == to_id_.end()) return std::nullopt;
    return it->second;
}

const std::string& LabelSet::name(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= names_.size()) {
        throw DataError("label set: id " + std::to_string(id) + " out of range");
    }
    return names_[static_cast<std::size_t>(id)];
}

std::vector<std::string> split_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&]() {
        if (!word.empty()) {
            out.push_back(word);
            word.clear();
        }
    };
    for (char ch : text) {
        const unsigned char u = static_cast<unsigned char>(ch);
        if (std::isalnum(u) || ch == '\'') {
            word.push_back(static_cast<char>(std::tolower(u)));
        } else if (std::isspace(u)) {
            flush();
        } else {
            flush();
            out.emplace_back(1, ch);  // punctuation as its own token
        }
    }
    flush();
    return out;
}

std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab) {
    std::vector<int> ids;
    for (const std::string& w : split_tokens(text)) ids.push_back(vocab.id(w));
    return ids;
}

std::vector<int> encode_input(const Utterance& u) {
    if (u.tokens.empty()) throw DataError("encode_input: empty utterance");
    std::vector<int> x;
    x.reserve(u.tokens.size() + 1);
    x.push_back(Vocabulary::kCls);
    x.insert(x.end(), u.tokens.begin(), u.tokens.end());
    return x;
}

std::size_t Dataset::total_utterances() const {
    std::size_t n = 0;
    for (const Conversation& c : conversations) n += c.utterances.size();
    return n;
}

Dataset build_dataset(const std::vector<RawConversation>& raw, const Vocabulary* vocab,
                      const LabelSet* labels) {
    Dataset ds;
    if (vocab != nullptr) {
        ds.vocab = *vocab;
    } else {
        std::set<std::string> words;
        for (const RawConversation& rc : raw)
            for (const RawUtterance& ru : rc.utterances)
                for (const std::string& w : split_tokens(ru.text)) words.insert(w);
        for (const std::string& w : words) ds.vocab.add(w);
    }
    if (labels != nullptr) {
        ds.labels = *labels;
    } else {
        std::set<std::string> names;
        for (const RawConversation& rc : raw)
            for (const RawUtterance& ru : rc.utterances)
                if (ru.label.has_value()) names.insert(*ru.label);
        for (const std::string& n : names) ds.labels.add(n);
    }

    // global speaker registry, sorted names for stable ids
    std::set<std::string> speaker_names;
    for (const RawConversation& rc : raw) {
        bool any_speaker = false, all_speaker = true;
        for (const RawUtterance& ru : rc.utterances) {
            if (ru.speaker.has_value()) any_speaker = true;
            else all_speaker = false;
        }
        if (any_speaker && !all_speaker) {
            throw DataError("conversation '" + rc.conversation_id +
                            "': field 'speaker' present on some utterances but not all");
        }
        if (any_speaker) {
            for (const RawUtterance& ru : rc.utterances) speaker_names.insert(*ru.speaker);
        } else {
            // turn-alternation fallback contributes ids "0"/"1"
            speaker_names.insert("0");
            if (rc.utterances.size() > 1) speaker_names.insert("1");
        }
    }
    std::unordered_map<std::string, int> speaker_ids;
    for (const std::string& n : speaker_names) {
        speaker_ids.emplace(n, static_cast<int>(ds.speakers.size()));
        ds.speakers.push_back(n);
    }

    for (const RawConversation& rc : raw) {
        if (rc.utterances.empty()) {
            throw DataError("conversation '" + rc.conversation_id + "': no utterances");
        }
        Conversation conv;
        conv.conversation_id = rc.conversation_id;
        const bool has_speakers = rc.utterances.front().speaker.has_value();
        for (std::size_t ui = 0; ui < rc.utterances.size(); ++ui) {
            const RawUtterance& ru = rc.utterances[ui];
            Utterance u;
            u.raw_text = ru.text;
            u.tokens = tokenize(ru.text, ds.vocab);
            if (u.tokens.empty()) {
                throw DataError("conversation '" + rc.conversation_id + "' utterance " +
                                std::to_string(ui) + ": empty utterance");
            }
            u.speaker_name = has_speakers ? *ru.speaker : (ui % 2 == 0 ? "0" : "1");
            u.speaker_id = speaker_ids.at(u.speaker_name);
            if (ru.label.has_value()) {
                u.label_name = *ru.label;
                u.label = ds.labels.id(u.label_name);
            }
            u.rule = label_rule_from_name(ru.rule);
            conv.utterances.push_back(std::move(u));
        }
        ds.conversations.push_back(std::move(conv));
    }
    return ds;
}

namespace {

std::vector<RawConversation> parse_conversation_json(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw DataError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("'" + path + "': invalid JSON: " + std::string(e.what()));
    }
    if (!j.is_array()) throw DataError("'" + path + "': top level must be an array");

    std::vector<RawConversation> raw;
    for (std::size_t ci = 0; ci < j.size(); ++ci) {
        const json& jc = j[ci];
        RawConversation rc;
        if (!jc.is_object() || !jc.contains("conversation_id") || !jc["conversation_id"].is_string()) {
            throw DataError("'" + path + "' conversation " + std::to_string(ci) +
                            ": missing field 'conversation_id'");
        }
        rc.conversation_id = jc["conversation_id"].get<std::string>();
        if (!jc.contains("utterances") || !jc["utterances"].is_array()) {
            throw DataError("conversation '" + rc.conversation_id + "': missing field 'utterances'");
        }
        for (std::size_t ui = 0; ui < jc["utterances"].size(); ++ui) {
            const json& ju = jc["utterances"][ui];
            RawUtterance ru;
            if (!ju.is_object() || !ju.contains("text") || !ju["text"].is_string()) {
                throw DataError("conversation '" + rc.conversation_id + "' utterance " +
                                std::to_string(ui) + ": missing field 'text'");
            }
            ru.text = ju["text"].get<std::string>();
            if (ju.contains("speaker")) {
                if (!ju["speaker"].is_string()) {
                    throw DataError("conversation '" + rc.conversation_id + "' utterance " +
                                    std::to_string(ui) + ": field 'speaker' must be a string");
                }
                ru.speaker = ju["speaker"].get<std::string>();
            }
            if (ju.contains("label")) {
                if (!ju["label"].is_string()) {
                    throw DataError("conversation '" + rc.conversation_id + "' utterance " +
                                    std::to_string(ui) + ": field 'label' must be a string");
                }
                ru.label = ju["label"].get<std::string>();
            }
            if (ju.contains("rule")) ru.rule = ju["rule"].get<std::string>();
            rc.utterances.push_back(std::move(ru));
        }
        raw.push_back(std::move(rc));
    }
    return raw;
}

}  // namespace

Dataset load_conversations(const std::string& path, const Vocabulary* vocab, const LabelSet* labels) {
    return build_dataset(parse_conversation_json(path), vocab, labels);
}

void save_conversations(const std::string& path, const std::vector<Conversation>& conversations) {
    json out = json::array();
    for (const Conversation& c : conversations) {
        json jc;
        jc["conversation_id"] = c.conversation_id;
        jc["utterances"] = json::array();
        for (const Utterance& u : c.utterances) {
            json ju;
            ju["text"] = u.raw_text;
            ju["speaker"] = u.speaker_name;
            if (u.label.has_value()) ju["label"] = u.label_name;
            if (u.rule != LabelRule::none) ju["rule"] = label_rule_name(u.rule);
            jc["utterances"].push_back(std::move(ju));
        }
        out.push_back(std::move(jc));
    }
    std::ofstream os(path);
    if (!os.is_open()) throw DataError("cannot write '" + path + "'");
    os << out.dump(2) << "\n";
}

void save_vocabulary(const std::string& path, const Vocabulary& vocab) {
    json out = json::object();
    for (std::size_t i = 0; i < vocab.size(); ++i) out[vocab.token(static_cast<int>(i))] = i;
    std::ofstream os(path);
    if (!os.is_open()) throw DataError("cannot write '" + path + "'");
    os << out.dump(2) << "\n";
}

Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw DataError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("'" + path + "': invalid JSON: " + std::string(e.what()));
    }
    std::vector<std::string> by_id(j.size());
    for (const auto& [token, idj] : j.items()) {
        const std::size_t id = idj.get<std::size_t>();
        if (id >= by_id.size()) throw DataError("vocabulary file: non-contiguous ids");
        by_id[id] = token;
    }
    if (by_id.size() < 3 || by_id[0] != "[CLS]" || by_id[1] != "[PAD]" || by_id[2] != "[UNK]") {
        throw DataError("vocabulary file: reserved entries [CLS]=0,[PAD]=1,[UNK]=2 required");
    }
    Vocabulary v;
    for (std::size_t i = 3; i < by_id.size(); ++i) v.add(by_id[i]);
    return v;
}

void save_labels(const std::string& path, const LabelSet& labels) {
    json out = json::object();
    for (std::size_t i = 0; i < labels.size(); ++i) out[labels.name(static_cast<int>(i))] = i;
    std::ofstream os(path);
    if (!os.is_open()) throw DataError("cannot write '" + path + "'");
    os << out.dump(2) << "\n";
}

LabelSet load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw DataError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("'" + path + "': invalid JSON: " + std::string(e.what()));
    }
    std::vector<std::string> by_id(j.size());
    for (const auto& [name, idj] : j.items()) {
        const std::size_t id = idj.get<std::size_t>();
        if (id >= by_id.size()) throw DataError("label file: non-contiguous ids");
        by_id[id] = name;
    }
    LabelSet ls;
    for (const std::string& n : by_id) ls.add(n);
    return ls;
}

}  // namespace dialogxl
