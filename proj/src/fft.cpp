#include "pwinv/fft.hpp"

#include <unsupported/Eigen/FFT>

#include <vector>

namespace pwinv {
namespace {

void lines(ComplexField& data, const Grid& g, bool inverse) {
  const int n = g.n;
  Eigen::FFT<double> fft;
  std::vector<cplx> in(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
  const std::size_t stride[3] = {1, std::size_t(n), std::size_t(n) * n};
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t s = stride[axis];
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) {
        const std::size_t base = stride[a1] * p + stride[a2] * q;
        for (int i = 0; i < n; ++i) in[std::size_t(i)] = data[Eigen::Index(base + s * i)];
        if (inverse) fft.inv(out, in);
        else fft.fwd(out, in);
        for (int i = 0; i < n; ++i) data[Eigen::Index(base + s * i)] = out[std::size_t(i)];
      }
  }
}

}  // namespace

void fft3_forward(ComplexField& data, const Grid& g) { lines(data, g, false); }
void fft3_inverse(ComplexField& data, const Grid& g) { lines(data, g, true); }

}  // namespace pwinv
