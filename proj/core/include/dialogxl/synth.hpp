#pragma once

#include <cstdint>

#include "dialogxl/data.hpp"

namespace dialogxl {

// Labeled-dialog generator whose labels are solvable only with speaker-aware
// context. Every utterance expresses one emotion keyword plus a one-token
// rule marker; the label is assigned by the utterance's rule:
//   local: its own keyword               (marker "today")
//   intra: the same speaker's previous keyword   (marker "again")
//   inter: the other party's most recent keyword (marker "too")
// For intra/inter the utterance's own keyword is an independent decoy, so a
// current-utterance-only classifier is at chance on those subsets. Rules
// with no applicable history fall back to local; the rule actually used is
// recorded on the utterance.
struct SynthOptions {
    std::uint64_t seed = 0;
    int conversations = 100;
    int speakers_min = 2;
    int speakers_max = 4;
    int utterances_min = 4;
    int utterances_max = 12;
    double mix_local = 1.0;
    double mix_intra = 0.0;
    double mix_inter = 0.0;
    int filler_min = 0;
    int filler_max = 2;
    // Skewed utterance-length profile for memory studies: 3/4 short
    // utterances, 1/4 long ones, mean/max token length 0.35. Overrides
    // filler_min/filler_max.
    bool long_tail = false;
};

Dataset synth_generate(const SynthOptions& opt);

// Recomputes each utterance's label from the transcript and its recorded
// rule; returns false on the first mismatch. Independent replay path used
// to validate generator consistency.
bool synth_replay_check(const Dataset& ds);

}  // namespace dialogxl
