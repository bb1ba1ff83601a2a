#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dialogxl/rng.hpp"

namespace dialogxl {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

// Storage precision. Everything is held in double buffers; f32 tensors are
// quantized through float after each producing operation, so their values
// are exactly what a native single-precision pipeline would represent.
enum class DType : std::uint8_t { f32, f64 };

// Dense n-dimensional real array. Value type with shared storage: copies
// alias the same buffer. Data is immutable after construction except for
// gradient accumulation and explicit in-place optimizer updates.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false, DType dtype = DType::f64);
    static Tensor full(Shape shape, double value, bool requires_grad = false, DType dtype = DType::f64);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false,
                            DType dtype = DType::f64);
    static Tensor randn(Shape shape, Rng& rng, double stddev, bool requires_grad = false,
                        DType dtype = DType::f64);
    static Tensor scalar(double value, bool requires_grad = false, DType dtype = DType::f64);

    bool defined() const { return d_ != nullptr; }
    const Shape& shape() const;
    std::size_t numel() const;
    std::size_t ndim() const;

    // 2-d helpers (throw unless ndim()==2)
    std::size_t rows() const;
    std::size_t cols() const;

    double at(std::size_t i) const;
    double at(std::size_t i, std::size_t j) const;
    double item() const;  // numel()==1 only

    std::span<const double> data() const;
    // Mutable view for optimizers; bypasses the tape, use on leaves only.
    std::span<double> data_mut();

    bool requires_grad() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    void accumulate_grad(std::span<const double> delta);
    void zero_grad();

    // Same storage, requires_grad=false, fresh identity. Gradient flow stops.
    Tensor detach() const;

    DType dtype() const;
    std::uint64_t id() const;

  private:
    struct Data;
    std::shared_ptr<Data> d_;
};

}  // namespace dialogxl
