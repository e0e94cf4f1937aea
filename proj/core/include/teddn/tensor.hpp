#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace teddn {

#ifdef TEDDN_SCALAR_FLOAT
using real = float;
#else
using real = double;
#endif

class Tape;

// Dense row-major n-dimensional array. Copies share the underlying buffer;
// a tensor is treated as immutable once it has been fed to an operation.
// Rank-0 tensors are allowed and hold a single scalar. All extents must be
// positive.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<long> shape);

    static Tensor zeros(std::vector<long> shape);
    static Tensor full(std::vector<long> shape, real value);
    static Tensor scalar(real value);
    static Tensor from(std::vector<long> shape, std::vector<real> values);

    bool defined() const { return static_cast<bool>(buf_); }
    const std::vector<long>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    long extent(int axis) const;
    long size() const { return size_; }

    real* data();
    const real* data() const;
    std::span<real> values() { return {data(), static_cast<std::size_t>(size_)}; }
    std::span<const real> values() const { return {data(), static_cast<std::size_t>(size_)}; }

    // Value of a size-1 tensor.
    real item() const;
    // Element by multi-index; test/debug convenience, not for hot paths.
    real at(std::span<const long> index) const;

    // Deep copy with a private buffer.
    Tensor clone() const;
    // Same buffer, new shape (element count must match). Safe because
    // tensors are immutable once created; the result is untraced.
    Tensor reshaped(std::vector<long> shape) const;
    // Same tensor with any tape linkage removed.
    Tensor detached() const;

    bool all_finite() const;
    std::string shape_str() const;

    bool traced() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    int node() const { return node_; }

private:
    std::vector<long> shape_;
    long size_ = 0;
    std::shared_ptr<std::vector<real>> buf_;
    Tape* tape_ = nullptr;
    int node_ = -1;

    friend class Tape;
};

// Product of extents; throws DimensionError on non-positive extents.
long shape_size(const std::vector<long>& shape);

std::string shape_to_string(const std::vector<long>& shape);

// Throws NumericError naming `what` if any element is NaN or Inf.
void check_finite(const Tensor& t, const std::string& what);

} // namespace teddn
