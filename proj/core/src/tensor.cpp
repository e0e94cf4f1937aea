#include "teddn/tensor.hpp"

#include "teddn/error.hpp"

#include <cmath>
#include <sstream>

namespace teddn {

long shape_size(const std::vector<long>& shape) {
    long n = 1;
    for (long e : shape) {
        if (e <= 0) {
            throw DimensionError("non-positive extent in shape " + shape_to_string(shape));
        }
        n *= e;
    }
    return n;
}

std::string shape_to_string(const std::vector<long>& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor(std::vector<long> shape)
    : shape_(std::move(shape)),
      size_(shape_size(shape_)),
      buf_(std::make_shared<std::vector<real>>(size_, real(0))) {}

Tensor Tensor::zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<long> shape, real value) {
    Tensor t(std::move(shape));
    for (real& v : *t.buf_) v = value;
    return t;
}

Tensor Tensor::scalar(real value) {
    Tensor t{std::vector<long>{}};
    (*t.buf_)[0] = value;
    return t;
}

Tensor Tensor::from(std::vector<long> shape, std::vector<real> values) {
    long n = shape_size(shape);
    if (n != static_cast<long>(values.size())) {
        throw DimensionError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_to_string(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.size_ = n;
    t.buf_ = std::make_shared<std::vector<real>>(std::move(values));
    return t;
}

long Tensor::extent(int axis) const {
    if (axis < 0 || axis >= rank()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_str());
    }
    return shape_[axis];
}

real* Tensor::data() {
    if (!buf_) throw ContractError("use of an undefined tensor");
    return buf_->data();
}

const real* Tensor::data() const {
    if (!buf_) throw ContractError("use of an undefined tensor");
    return buf_->data();
}

real Tensor::item() const {
    if (size_ != 1) throw ContractError("item() on tensor of shape " + shape_str());
    return data()[0];
}

real Tensor::at(std::span<const long> index) const {
    if (static_cast<int>(index.size()) != rank()) {
        throw DimensionError("index rank " + std::to_string(index.size()) +
                             " does not match tensor shape " + shape_str());
    }
    long off = 0;
    for (int d = 0; d < rank(); ++d) {
        if (index[d] < 0 || index[d] >= shape_[d]) {
            throw BoundsError("index out of range at axis " + std::to_string(d));
        }
        off = off * shape_[d] + index[d];
    }
    return data()[off];
}

Tensor Tensor::reshaped(std::vector<long> shape) const {
    long n = shape_size(shape);
    if (n != size_)
        throw DimensionError("reshape from " + shape_to_string(shape_) + " to " +
                             shape_to_string(shape) + " changes element count");
    Tensor out = *this;
    out.shape_ = std::move(shape);
    out.tape_ = nullptr;
    out.node_ = -1;
    return out;
}

Tensor Tensor::detached() const {
    Tensor out = *this;
    out.tape_ = nullptr;
    out.node_ = -1;
    return out;
}

Tensor Tensor::clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.size_ = size_;
    t.buf_ = std::make_shared<std::vector<real>>(*buf_);
    return t;
}

bool Tensor::all_finite() const {
    for (real v : *buf_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

void check_finite(const Tensor& t, const std::string& what) {
    if (!t.all_finite()) {
        throw NumericError("non-finite values in " + what);
    }
}

} // namespace teddn
