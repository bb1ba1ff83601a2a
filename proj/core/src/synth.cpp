#include "dialogxl/synth.hpp"

#include <array>
#include <cmath>
#include <unordered_map>

#include "dialogxl/errors.hpp"
#include "dialogxl/rng.hpp"

namespace dialogxl {

namespace {

struct KeywordTable {
    std::array<const char*, 6> labels = {"anger", "fear", "joy", "neutral", "sadness", "surprise"};
    std::array<std::array<const char*, 2>, 6> keywords = {{
        {"angry", "furious"},
        {"scared", "afraid"},
        {"happy", "glad"},
        {"fine", "okay"},
        {"sad", "gloomy"},
        {"shocked", "amazed"},
    }};
};

const std::array<const char*, 16> kFiller = {"well", "so",      "um",     "you",    "know",  "really",
                                             "just", "quite",   "honestly", "anyway", "right", "yeah",
                                             "hmm",  "look",    "listen", "indeed"};

const std::array<const char*, 4> kSpeakerNames = {"A", "B", "C", "D"};

int draw_filler_count(const SynthOptions& opt, Rng& rng) {
    if (opt.long_tail) {
        // 5..9 total tokens 3/4 of the time, 30..40 the rest; the core is 4
        // tokens, so mean length 14 against max 40 (ratio 0.35)
        if (rng.uniform() < 0.25) return rng.uniform_int(26, 36);
        return rng.uniform_int(1, 5);
    }
    return rng.uniform_int(opt.filler_min, opt.filler_max);
}

}  // namespace

Dataset synth_generate(const SynthOptions& opt) {
    const double mix_sum = opt.mix_local + opt.mix_intra + opt.mix_inter;
    if (std::abs(mix_sum - 1.0) > 1e-9) {
        throw ConfigError("synth: task mix must sum to 1, got " + std::to_string(mix_sum));
    }
    if (opt.speakers_min < 2 || opt.speakers_max > 4 || opt.speakers_min > opt.speakers_max) {
        throw ConfigError("synth: speaker count range must lie within 2..4");
    }
    if (opt.utterances_min < 1 || opt.utterances_min > opt.utterances_max) {
        throw ConfigError("synth: bad utterance count range");
    }

    const KeywordTable table;
    Rng rng(opt.seed);
    std::vector<RawConversation> raw;
    raw.reserve(static_cast<std::size_t>(opt.conversations));

    for (int ci = 0; ci < opt.conversations; ++ci) {
        RawConversation rc;
        rc.conversation_id = "synth-" + std::to_string(ci);
        const int n_speakers = rng.uniform_int(opt.speakers_min, opt.speakers_max);
        const int n_utterances = rng.uniform_int(opt.utterances_min, opt.utterances_max);

        std::vector<int> speaker_of;     // per utterance
        std::vector<int> expressed_of;   // label id of the keyword in the text

        for (int t = 0; t < n_utterances; ++t) {
            const int speaker = rng.uniform_int(0, n_speakers - 1);
            const int expressed = rng.uniform_int(0, 5);

            const double r = rng.uniform();
            LabelRule rule = LabelRule::local;
            if (r >= opt.mix_local && r < opt.mix_local + opt.mix_intra) rule = LabelRule::intra;
            else if (r >= opt.mix_local + opt.mix_intra) rule = LabelRule::inter;

            // resolve the label source; fall back to local when no history fits
            int label = expressed;
            if (rule == LabelRule::intra) {
                int src = -1;
                for (int k = t - 1; k >= 0; --k)
                    if (speaker_of[static_cast<std::size_t>(k)] == speaker) { src = k; break; }
                if (src < 0) rule = LabelRule::local;
                else label = expressed_of[static_cast<std::size_t>(src)];
            } else if (rule == LabelRule::inter) {
                int src = -1;
                for (int k = t - 1; k >= 0; --k)
                    if (speaker_of[static_cast<std::size_t>(k)] != speaker) { src = k; break; }
                if (src < 0) rule = LabelRule::local;
                else label = expressed_of[static_cast<std::size_t>(src)];
            }

            const char* marker = rule == LabelRule::local ? "today"
                                 : rule == LabelRule::intra ? "again"
                                                            : "too";
            const char* keyword =
                table.keywords[static_cast<std::size_t>(expressed)][static_cast<std::size_t>(rng.uniform_int(0, 1))];

            const int filler = draw_filler_count(opt, rng);
            const int pre = rng.uniform_int(0, filler);
            std::string text;
            for (int k = 0; k < pre; ++k) {
                text += kFiller[static_cast<std::size_t>(rng.uniform_int(0, 15))];
                text += ' ';
            }
            text += "i feel ";
            text += keyword;
            text += ' ';
            text += marker;
            for (int k = pre; k < filler; ++k) {
                text += ' ';
                text += kFiller[static_cast<std::size_t>(rng.uniform_int(0, 15))];
            }

            RawUtterance ru;
            ru.text = std::move(text);
            ru.speaker = kSpeakerNames[static_cast<std::size_t>(speaker)];
            ru.label = table.labels[static_cast<std::size_t>(label)];
            ru.rule = label_rule_name(rule);
            rc.utterances.push_back(std::move(ru));

            speaker_of.push_back(speaker);
            expressed_of.push_back(expressed);
        }
        raw.push_back(std::move(rc));
    }
    return build_dataset(raw);
}

bool synth_replay_check(const Dataset& ds) {
    // keyword token -> label id, rebuilt from the dataset's own label set
    const KeywordTable table;
    std::unordered_map<std::string, int> kw_label;
    for (std::size_t li = 0; li < table.labels.size(); ++li) {
        const auto id = ds.labels.find(table.labels[li]);
        if (!id.has_value()) return false;
        for (const char* kw : table.keywords[li]) kw_label.emplace(kw, *id);
    }
    auto expressed_label = [&](const Utterance& u) -> int {
        for (int tok : u.tokens) {
            auto it = kw_label.find(ds.vocab.token(tok));
            if (it != kw_label.end()) return it->second;
        }
        return -1;
    };

    for (const Conversation& c : ds.conversations) {
        for (std::size_t t = 0; t < c.utterances.size(); ++t) {
            const Utterance& u = c.utterances[t];
            if (!u.label.has_value()) return false;
            int expect = -1;
            switch (u.rule) {
                case LabelRule::local:
                    expect = expressed_label(u);
                    break;
                case LabelRule::intra:
                    for (std::size_t k = t; k-- > 0;) {
                        if (c.utterances[k].speaker_id == u.speaker_id) {
                            expect = expressed_label(c.utterances[k]);
                            break;
                        }
                    }
                    break;
                case LabelRule::inter:
                    for (std::size_t k = t; k-- > 0;) {
                        if (c.utterances[k].speaker_id != u.speaker_id) {
                            expect = expressed_label(c.utterances[k]);
                            break;
                        }
                    }
                    break;
                case LabelRule::none:
                    return false;
            }
            if (expect != *u.label) return false;
        }
    }
    return true;
}

}  // namespace dialogxl
