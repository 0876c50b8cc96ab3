#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace smat {

/// Dense row-major float64 array. Most of the network works on rank-2
/// tensors laid out as (tokens x channels); rank-1 tensors behave as a
/// single row.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, double fill = 0.0);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor matrix(int rows, int cols, double fill = 0.0) { return Tensor({rows, cols}, fill); }
    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_, 0.0); }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    /// Leading dimension (1 for rank-0/rank-1 tensors).
    int rows() const;
    /// Product of all trailing dimensions.
    int cols() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols() + c]; }

    void fill(double v);
    /// Same element count, new shape.
    Tensor reshaped(std::vector<int> shape) const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::string shape_string() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::size_t element_count(const std::vector<int>& shape);

} // namespace smat
