#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gradsplit/errors.hpp"
#include "gradsplit/rng.hpp"

namespace gradsplit {

using Shape = std::vector<std::int64_t>;

std::string shape_to_string(const Shape& shape);
std::int64_t shape_numel(const Shape& shape);

// Dense row-major tensor of 64-bit reals with an optional gradient slot.
//
// A Tensor is a cheap handle: copies share storage, clone() deep-copies.
// Values are immutable once an op has produced them; only the grad slot is
// written afterwards (by Tape::backward) and cleared (by optimizer steps).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor from_data(Shape shape, std::vector<double> data);
    static Tensor scalar(double value);
    // i.i.d. uniform entries in [lo, hi).
    static Tensor uniform(Shape shape, double lo, double hi, Rng& rng);

    bool defined() const { return storage_ != nullptr; }
    const Shape& shape() const { return storage_->shape; }
    std::int64_t numel() const { return static_cast<std::int64_t>(storage_->data.size()); }
    std::int64_t dim(std::size_t i) const { return storage_->shape[i]; }
    std::size_t rank() const { return storage_->shape.size(); }

    double* data() { return storage_->data.data(); }
    const double* data() const { return storage_->data.data(); }
    double& at(std::int64_t flat_index) { return storage_->data[static_cast<std::size_t>(flat_index)]; }
    double at(std::int64_t flat_index) const { return storage_->data[static_cast<std::size_t>(flat_index)]; }

    // Value of a scalar tensor; ContractError if numel() != 1.
    double item() const;

    bool has_grad() const { return defined() && !storage_->grad.empty(); }
    double* grad() { return storage_->grad.empty() ? nullptr : storage_->grad.data(); }
    const double* grad() const { return storage_->grad.empty() ? nullptr : storage_->grad.data(); }

    // Allocates a zero grad slot if absent.
    void ensure_grad();
    void zero_grad();
    // Drops the grad slot entirely.
    void clear_grad();

    // Deep copy of values (grad slot not copied).
    Tensor clone() const;

    bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

private:
    struct Storage {
        Shape shape;
        std::vector<double> data;
        std::vector<double> grad;  // empty == absent
    };
    explicit Tensor(std::shared_ptr<Storage> s) : storage_(std::move(s)) {}
    std::shared_ptr<Storage> storage_;
};

bool all_finite(const Tensor& t);

// Rows are blocks over the first dimension. Both return copies.
Tensor slice_rows(const Tensor& t, std::int64_t begin, std::int64_t end);
Tensor gather_rows(const Tensor& t, const std::vector<std::int64_t>& indices);

}  // namespace gradsplit
