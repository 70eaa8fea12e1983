#include "core/tensor.h"

#include <cmath>
#include <sstream>

#include "core/error.h"

namespace pa {

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

std::string shape_to_string(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); i++) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), numel_(shape_numel(shape_)) {
    for (int64_t d : shape_) {
        if (d < 0) throw Error("tensor shape has negative dim " + shape_to_string(shape_));
    }
    data_ = std::make_shared<std::vector<float>>((size_t)numel_, 0.0f);
}

Tensor::Tensor(std::vector<int64_t> shape, float fill) : Tensor(std::move(shape)) {
    this->fill(fill);
}

Tensor Tensor::from_data(std::vector<int64_t> shape, std::vector<float> data) {
    if (shape_numel(shape) != (int64_t)data.size()) {
        throw Error("tensor data size " + std::to_string(data.size()) +
                    " does not match shape " + shape_to_string(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.numel_ = (int64_t)data.size();
    t.data_ = std::make_shared<std::vector<float>>(std::move(data));
    return t;
}

Tensor Tensor::reshape(std::vector<int64_t> shape) const {
    if (shape_numel(shape) != numel_) {
        throw Error("reshape " + shape_str() + " -> " + shape_to_string(shape) +
                    " changes element count");
    }
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
}

Tensor Tensor::clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.numel_ = numel_;
    t.data_ = std::make_shared<std::vector<float>>(*data_);
    return t;
}

void Tensor::fill(float v) {
    for (auto& x : *data_) x = v;
}

bool Tensor::all_finite() const {
    for (float x : *data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

float Tensor::max_abs() const {
    float m = 0.0f;
    for (float x : *data_) m = std::max(m, std::fabs(x));
    return m;
}

std::string Tensor::shape_str() const {
    return shape_to_string(shape_);
}

}  // namespace pa
