#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace dialogxl {

// Provenance of a synthetic label: which assignment rule produced it.
enum class LabelRule { none, local, intra, inter };

const char* label_rule_name(LabelRule r);
LabelRule label_rule_from_name(const std::string& name);

struct Utterance {
    std::vector<int> tokens;  // word-level ids, no [CLS]
    int speaker_id = 0;
    std::optional<int> label;
    std::string raw_text;
    std::string speaker_name;
    std::string label_name;
    LabelRule rule = LabelRule::none;
};

struct Conversation {
    std::string conversation_id;
    std::vector<Utterance> utterances;
};

// Word-level vocabulary with fixed reserved ids. Reserved entries are never
// reassigned; non-reserved tokens map bijectively.
class Vocabulary {
  public:
    static constexpr int kCls = 0;
    static constexpr int kPad = 1;
    static constexpr int kUnk = 2;

    Vocabulary();

    int add(const std::string& token);              // idempotent
    int id(const std::string& token) const;         // kUnk when absent
    std::optional<int> find(const std::string& token) const;
    const std::string& token(int id) const;
    std::size_t size() const { return to_token_.size(); }

    const std::vector<std::string>& tokens() const { return to_token_; }

  private:
    std::unordered_map<std::string, int> to_id_;
    std::vector<std::string> to_token_;
};

// Emotion label set; ids contiguous from 0 in insertion order.
class LabelSet {
  public:
    int add(const std::string& name);
    int id(const std::string& name) const;  // throws DataError when unknown
    std::optional<int> find(const std::string& name) const;
    const std::string& name(int id) const;
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

  private:
    std::unordered_map<std::string, int> to_id_;
    std::vector<std::string> names_;
};

// Lowercased split on whitespace and punctuation; punctuation marks become
// single-character tokens. Unknown words map to [UNK]. "" -> [].
std::vector<std::string> split_tokens(const std::string& text);
std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab);

// x_t: [CLS] followed by the utterance token ids. Throws on empty input.
std::vector<int> encode_input(const Utterance& u);

struct Dataset {
    std::vector<Conversation> conversations;
    Vocabulary vocab;
    LabelSet labels;
    std::vector<std::string> speakers;  // registry, id -> name

    std::size_t total_utterances() const;
};

// Conversation JSON schema (one top-level array):
//   [{"conversation_id": str,
//     "utterances": [{"text": str, "speaker": str?, "label": str?, "rule": str?}]}]
// When "speaker" is absent for an entire conversation the utterance turns
// are taken as the speaker turns (ids alternate 0,1). A vocabulary/label set
// passed in is used as-is (unknown labels are an error); otherwise both are
// built from the file deterministically (sorted token / label names).
Dataset load_conversations(const std::string& path, const Vocabulary* vocab = nullptr,
                           const LabelSet* labels = nullptr);

// Same builder applied to in-memory records; shared by the synthetic
// generator and tests.
struct RawUtterance {
    std::string text;
    std::optional<std::string> speaker;
    std::optional<std::string> label;
    std::string rule;
};
struct RawConversation {
    std::string conversation_id;
    std::vector<RawUtterance> utterances;
};
Dataset build_dataset(const std::vector<RawConversation>& raw, const Vocabulary* vocab = nullptr,
                      const LabelSet* labels = nullptr);

void save_conversations(const std::string& path, const std::vector<Conversation>& conversations);

// Vocabulary file: JSON object token -> id including reserved entries.
void save_vocabulary(const std::string& path, const Vocabulary& vocab);
Vocabulary load_vocabulary(const std::string& path);

// Label map file: JSON object name -> id.
void save_labels(const std::string& path, const LabelSet& labels);
LabelSet load_labels(const std::string& path);

}  // namespace dialogxl
