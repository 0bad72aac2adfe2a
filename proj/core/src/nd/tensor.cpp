#include "gentract/nd/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace gentract::nd {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw std::invalid_argument("tensor extent must be positive, got " + std::to_string(e));
        n *= e;
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_)) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = value;
    return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

int Tensor::dim(int axis) const {
    if (axis < 0) axis += rank();
    if (axis < 0 || axis >= rank()) throw std::out_of_range("tensor axis out of range");
    return shape_[static_cast<std::size_t>(axis)];
}

namespace {
std::int64_t flat_index(const std::vector<int>& shape, std::initializer_list<int> idx) {
    if (idx.size() != shape.size()) throw std::out_of_range("index rank mismatch");
    std::int64_t flat = 0;
    std::size_t k = 0;
    for (int i : idx) {
        if (i < 0 || i >= shape[k]) throw std::out_of_range("tensor index out of bounds");
        flat = flat * shape[k] + i;
        ++k;
    }
    return flat;
}
}  // namespace

double& Tensor::at(std::initializer_list<int> idx) {
    return data_[static_cast<std::size_t>(flat_index(shape_, idx))];
}

double Tensor::at(std::initializer_list<int> idx) const {
    return data_[static_cast<std::size_t>(flat_index(shape_, idx))];
}

double Tensor::item() const {
    if (data_.size() != 1) throw std::logic_error("item() requires a scalar tensor");
    return data_[0];
}

void Tensor::check_finite(const char* what) const {
    for (double x : data_) {
        if (!std::isfinite(x)) {
            throw std::runtime_error(std::string("non-finite value produced by ") + what);
        }
    }
}

std::string Tensor::shape_str(const std::vector<int>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

}  // namespace gentract::nd
