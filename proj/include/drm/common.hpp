#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace drm {

/// Raised when a caller supplies parameters outside an operation's contract
/// (bad radius, mismatched dimensions, N != M where the bound requires it...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an argument has the wrong dimension for the object it is used with.
class DimensionMismatch : public InvalidArgument {
public:
    DimensionMismatch(const std::string& what, std::size_t expected, std::size_t got)
        : InvalidArgument(what + ": expected dimension " + std::to_string(expected) + ", got " +
                          std::to_string(got)) {}
};

/// Raised when a numerical procedure cannot produce a result (singular system etc).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fixed-dimension collection of points stored contiguously.
class PointSet {
public:
    PointSet() = default;
    explicit PointSet(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
    bool empty() const { return data_.empty(); }

    std::span<const double> operator[](std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    std::span<double> operator[](std::size_t i) { return {data_.data() + i * dim_, dim_}; }

    void reserve(std::size_t n) { data_.reserve(n * dim_); }

    void push_back(std::span<const double> p) {
        if (p.size() != dim_) throw DimensionMismatch("PointSet::push_back", dim_, p.size());
        data_.insert(data_.end(), p.begin(), p.end());
    }

    const std::vector<double>& raw() const { return data_; }

    friend bool operator==(const PointSet&, const PointSet&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

}  // namespace drm
