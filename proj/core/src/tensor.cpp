#include "dialogxl/tensor.hpp"

#include <atomic>
#include <sstream>

#include "dialogxl/errors.hpp"

namespace dialogxl {

namespace {

std::atomic<std::uint64_t> next_tensor_id{1};

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

struct Tensor::Data {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    DType dtype = DType::f64;
    std::uint64_t id = 0;
};

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad, DType dtype) {
    if (shape_numel(shape) != data.size()) {
        throw DimensionError("tensor: shape " + shape_str(shape) + " wants " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(data.size()));
    }
    Tensor t;
    t.d_ = std::make_shared<Data>();
    t.d_->shape = std::move(shape);
    t.d_->values = std::move(data);
    t.d_->requires_grad = requires_grad;
    t.d_->dtype = dtype;
    t.d_->id = next_tensor_id.fetch_add(1);
    if (dtype == DType::f32) {
        for (double& v : t.d_->values) v = static_cast<double>(static_cast<float>(v));
    }
    return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad, DType dtype) {
    std::vector<double> data(shape_numel(shape), 0.0);
    return from_data(std::move(shape), std::move(data), requires_grad, dtype);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad, DType dtype) {
    std::vector<double> data(shape_numel(shape), value);
    return from_data(std::move(shape), std::move(data), requires_grad, dtype);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad, DType dtype) {
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.normal(0.0, stddev);
    return from_data(std::move(shape), std::move(data), requires_grad, dtype);
}

Tensor Tensor::scalar(double value, bool requires_grad, DType dtype) {
    return from_data(Shape{1}, std::vector<double>{value}, requires_grad, dtype);
}

const Shape& Tensor::shape() const { return d_->shape; }

std::size_t Tensor::numel() const { return d_->values.size(); }

std::size_t Tensor::ndim() const { return d_->shape.size(); }

std::size_t Tensor::rows() const {
    if (ndim() != 2) throw DimensionError("rows(): tensor is " + shape_str(d_->shape) + ", not 2-d");
    return d_->shape[0];
}

std::size_t Tensor::cols() const {
    if (ndim() != 2) throw DimensionError("cols(): tensor is " + shape_str(d_->shape) + ", not 2-d");
    return d_->shape[1];
}

double Tensor::at(std::size_t i) const { return d_->values.at(i); }

double Tensor::at(std::size_t i, std::size_t j) const {
    return d_->values.at(i * cols() + j);
}

double Tensor::item() const {
    if (numel() != 1) {
        throw DimensionError("item(): tensor " + shape_str(d_->shape) + " is not a scalar");
    }
    return d_->values[0];
}

std::span<const double> Tensor::data() const { return d_->values; }

std::span<double> Tensor::data_mut() { return d_->values; }

bool Tensor::requires_grad() const { return d_ && d_->requires_grad; }

bool Tensor::has_grad() const { return d_ && !d_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (d_->grad.empty()) {
        throw NumericError("grad(): tensor has no accumulated gradient");
    }
    return d_->grad;
}

void Tensor::accumulate_grad(std::span<const double> delta) {
    if (delta.size() != d_->values.size()) {
        throw DimensionError("accumulate_grad: gradient size " + std::to_string(delta.size()) +
                             " does not match tensor size " + std::to_string(d_->values.size()));
    }
    if (d_->grad.empty()) d_->grad.assign(d_->values.size(), 0.0);
    for (std::size_t i = 0; i < delta.size(); ++i) d_->grad[i] += delta[i];
}

void Tensor::zero_grad() {
    if (d_) d_->grad.clear();
}

Tensor Tensor::detach() const {
    Tensor t;
    t.d_ = std::make_shared<Data>();
    t.d_->shape = d_->shape;
    t.d_->values = d_->values;  // copy: the cache must not alias live activations
    t.d_->requires_grad = false;
    t.d_->dtype = d_->dtype;
    t.d_->id = next_tensor_id.fetch_add(1);
    return t;
}

DType Tensor::dtype() const { return d_->dtype; }

std::uint64_t Tensor::id() const { return d_->id; }

}  // namespace dialogxl
