#include "gradsplit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gradsplit {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (std::int64_t extent : shape) {
        if (extent <= 0) {
            throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
        }
        n *= extent;
    }
    return n;
}

Tensor Tensor::zeros(Shape shape) {
    const std::int64_t n = shape_numel(shape);
    auto storage = std::make_shared<Storage>();
    storage->shape = std::move(shape);
    storage->data.assign(static_cast<std::size_t>(n), 0.0);
    return Tensor(std::move(storage));
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.storage_->data.begin(), t.storage_->data.end(), value);
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
    const std::int64_t n = shape_numel(shape);
    if (n != static_cast<std::int64_t>(data.size())) {
        throw DimensionError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_to_string(shape));
    }
    auto storage = std::make_shared<Storage>();
    storage->shape = std::move(shape);
    storage->data = std::move(data);
    return Tensor(std::move(storage));
}

Tensor Tensor::scalar(double value) {
    return from_data({1}, {value});
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng) {
    Tensor t = zeros(std::move(shape));
    for (double& v : t.storage_->data) v = uniform_range(rng, lo, hi);
    return t;
}

double Tensor::item() const {
    if (!defined() || numel() != 1) {
        throw ContractError("item() requires a scalar tensor, got " +
                            (defined() ? shape_to_string(shape()) : std::string("<undefined>")));
    }
    return storage_->data[0];
}

void Tensor::ensure_grad() {
    if (storage_->grad.empty()) {
        storage_->grad.assign(storage_->data.size(), 0.0);
    }
}

void Tensor::zero_grad() {
    std::fill(storage_->grad.begin(), storage_->grad.end(), 0.0);
}

void Tensor::clear_grad() {
    storage_->grad.clear();
    storage_->grad.shrink_to_fit();
}

Tensor Tensor::clone() const {
    auto storage = std::make_shared<Storage>();
    storage->shape = storage_->shape;
    storage->data = storage_->data;
    return Tensor(std::move(storage));
}

bool all_finite(const Tensor& t) {
    const double* p = t.data();
    const std::int64_t n = t.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        if (!std::isfinite(p[i])) return false;
    }
    return true;
}

namespace {

std::int64_t row_stride(const Tensor& t) {
    std::int64_t stride = 1;
    for (std::size_t i = 1; i < t.rank(); ++i) stride *= t.dim(i);
    return stride;
}

Shape rows_shape(const Tensor& t, std::int64_t rows) {
    Shape s = t.shape();
    s[0] = rows;
    return s;
}

}  // namespace

Tensor slice_rows(const Tensor& t, std::int64_t begin, std::int64_t end) {
    if (begin < 0 || end < begin || end > t.dim(0)) {
        throw ContractError("row slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                            ") out of range for " + shape_to_string(t.shape()));
    }
    const std::int64_t stride = row_stride(t);
    std::vector<double> data(static_cast<std::size_t>((end - begin) * stride));
    std::copy(t.data() + begin * stride, t.data() + end * stride, data.begin());
    return Tensor::from_data(rows_shape(t, end - begin), std::move(data));
}

Tensor gather_rows(const Tensor& t, const std::vector<std::int64_t>& indices) {
    const std::int64_t stride = row_stride(t);
    std::vector<double> data;
    data.reserve(indices.size() * static_cast<std::size_t>(stride));
    for (std::int64_t idx : indices) {
        if (idx < 0 || idx >= t.dim(0)) {
            throw ContractError("row index " + std::to_string(idx) + " out of range for " +
                                shape_to_string(t.shape()));
        }
        data.insert(data.end(), t.data() + idx * stride, t.data() + (idx + 1) * stride);
    }
    return Tensor::from_data(rows_shape(t, static_cast<std::int64_t>(indices.size())), std::move(data));
}

}  // namespace gradsplit
