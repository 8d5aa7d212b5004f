#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ftlab/error.hpp"

namespace ftlab {

int64_t dims_product(std::span<const int> dims);
std::string dims_to_string(std::span<const int> dims);

// Dense n-dimensional array of doubles, row-major. Plain value type; the
// gradient that may accompany a tensor lives on the tape node holding it.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> dims)
        : dims_(std::move(dims)), data_(static_cast<size_t>(dims_product(dims_)), 0.0) {}
    Tensor(std::vector<int> dims, std::vector<double> values) : dims_(std::move(dims)), data_(std::move(values)) {
        if (static_cast<int64_t>(data_.size()) != dims_product(dims_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match dims " +
                             dims_to_string(dims_));
        }
    }

    static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }
    static Tensor full(std::vector<int> dims, double v) {
        Tensor t(std::move(dims));
        for (double& x : t.data_) x = v;
        return t;
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<int>& dims() const { return dims_; }
    int dim(int i) const { return dims_[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(dims_.size()); }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Rank-2 accessors.
    double& at(int r, int c) { return data_[static_cast<size_t>(r) * dims_[1] + c]; }
    double at(int r, int c) const { return data_[static_cast<size_t>(r) * dims_[1] + c]; }

    bool same_dims(const Tensor& o) const { return dims_ == o.dims_; }
    bool all_finite() const;
    std::string shape_str() const { return dims_to_string(dims_); }

private:
    std::vector<int> dims_;
    std::vector<double> data_;
};

}  // namespace ftlab
