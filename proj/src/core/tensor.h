#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace pa {

// Dense float32 tensor, contiguous row-major. Copies are shallow (shared
// buffer); use clone() for a deep copy. Rank is small (<= 5) everywhere in
// this codebase.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shape);
    Tensor(std::vector<int64_t> shape, float fill);

    static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int64_t> shape, float v) { return Tensor(std::move(shape), v); }
    static Tensor from_data(std::vector<int64_t> shape, std::vector<float> data);

    bool defined() const { return data_ != nullptr; }
    int64_t numel() const { return numel_; }
    int ndim() const { return (int)shape_.size(); }
    int64_t dim(int i) const { return shape_[(size_t)i]; }
    const std::vector<int64_t>& shape() const { return shape_; }

    float* data() { return data_->data(); }
    const float* data() const { return data_->data(); }
    float& operator[](int64_t i) { return (*data_)[(size_t)i]; }
    float operator[](int64_t i) const { return (*data_)[(size_t)i]; }

    // Shares the buffer; element count must match.
    Tensor reshape(std::vector<int64_t> shape) const;
    Tensor clone() const;

    void fill(float v);
    void zero() { fill(0.0f); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    float max_abs() const;

    std::string shape_str() const;

private:
    std::vector<int64_t> shape_;
    std::shared_ptr<std::vector<float>> data_;
    int64_t numel_ = 0;
};

int64_t shape_numel(const std::vector<int64_t>& shape);
std::string shape_to_string(const std::vector<int64_t>& shape);

}  // namespace pa
