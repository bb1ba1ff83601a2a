#pragma once

#include <cstdint>
#include <functional>
#include <unordered_set>
#include <vector>

#include "dialogxl/tensor.hpp"

namespace dialogxl {

// Reverse-mode tape. Operations append records in creation order, which is a
// valid topological order because an op's inputs always exist before its
// output. Saved values for the backward step live inside each record's
// closure (tensors captured by value share storage, so nothing is copied).
//
// The active tape is a thread_local: one model forward/backward pass is
// single-threaded, and independent passes on other threads get their own
// tape. No scope active means no recording (inference mode).
class Tape {
  public:
    struct Record {
        const char* op;
        std::vector<std::uint64_t> inputs;
        std::uint64_t output;
        std::function<void()> backward;
    };

    void record(const char* op, std::vector<std::uint64_t> inputs, const Tensor& out,
                std::function<void()> backward);

    bool produced(std::uint64_t tensor_id) const { return outputs_.contains(tensor_id); }
    std::size_t size() const { return records_.size(); }
    const std::vector<Record>& records() const { return records_; }
    void clear();

    static Tape* current();

  private:
    std::vector<Record> records_;
    std::unordered_set<std::uint64_t> outputs_;
};

// RAII activation of a tape on this thread. Nestable; inner scope wins.
class TapeScope {
  public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* prev_;
};

// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients
// accumulate additively into every tensor the records touch; leaves keep
// theirs until zero_grad. Throws if loss is not a scalar produced by tape.
void backward(Tape& tape, const Tensor& loss);

}  // namespace dialogxl
