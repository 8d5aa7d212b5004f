#include "ftlab/tensor.hpp"

#include <cmath>
#include <sstream>

namespace ftlab {

int64_t dims_product(std::span<const int> dims) {
    if (dims.empty()) throw ShapeError("tensor must have at least one dimension");
    int64_t n = 1;
    for (int d : dims) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + dims_to_string(dims));
        n *= d;
    }
    return n;
}

std::string dims_to_string(std::span<const int> dims) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < dims.size(); ++i) {
        if (i) os << "x";
        os << dims[i];
    }
    os << "]";
    return os.str();
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace ftlab
