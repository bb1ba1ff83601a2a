#include "dialogxl/tape.hpp"

#include "dialogxl/errors.hpp"

namespace dialogxl {

namespace {
thread_local Tape* active_tape = nullptr;
}

void Tape::record(const char* op, std::vector<std::uint64_t> inputs, const Tensor& out,
                  std::function<void()> backward) {
    records_.push_back(Record{op, std::move(inputs), out.id(), std::move(backward)});
    outputs_.insert(out.id());
}

void Tape::clear() {
    records_.clear();
    outputs_.clear();
}

Tape* Tape::current() { return active_tape; }

TapeScope::TapeScope(Tape& tape) : prev_(active_tape) { active_tape = &tape; }

TapeScope::~TapeScope() { active_tape = prev_; }

void backward(Tape& tape, const Tensor& loss) {
    if (loss.numel() != 1) {
        throw DimensionError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    }
    if (!tape.produced(loss.id())) {
        throw NumericError("backward: loss tensor was not produced by this tape");
    }
    Tensor seed = loss;  // shares storage
    seed.zero_grad();
    const double one = 1.0;
    seed.accumulate_grad(std::span<const double>(&one, 1));
    const auto& recs = tape.records();
    for (std::size_t i = recs.size(); i-- > 0;) {
        recs[i].backward();
    }
}

}  // namespace dialogxl
