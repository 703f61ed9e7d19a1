#include "ulm/preprocess.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace ulm {

namespace {

Eigen::MatrixXcd casorati(const IQBlock& block) {
    const Eigen::Index space = static_cast<Eigen::Index>(block.frame_size());
    Eigen::MatrixXcd m(space, block.nt);
    for (int t = 0; t < block.nt; ++t)
        for (Eigen::Index s = 0; s < space; ++s)
            m(s, t) = std::complex<double>(block.data[static_cast<std::size_t>(t) * block.frame_size() +
                                                      static_cast<std::size_t>(s)]);
    return m;
}

}  // namespace

IQBlock svd_clutter_filter(const IQBlock& block, int cutoff) {
    const int rank_bound = static_cast<int>(std::min<std::size_t>(block.frame_size(), static_cast<std::size_t>(block.nt)));
    if (cutoff < 0 || cutoff > rank_bound)
        throw ContractError("SVD cutoff must lie in [0, min(space, time)] = [0, " + std::to_string(rank_bound) + "]");
    if (cutoff == 0) return block;
    IQBlock out(block.nt, block.nz, block.nx);
    if (cutoff == rank_bound) return out;

    const Eigen::MatrixXcd m = casorati(block);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& u = svd.matrixU();
    const auto& v = svd.matrixV();
    const auto& s = svd.singularValues();
    Eigen::MatrixXcd tissue = u.leftCols(cutoff) * s.head(cutoff).asDiagonal() * v.leftCols(cutoff).adjoint();
    const Eigen::MatrixXcd filtered = m - tissue;
    const std::size_t fs = block.frame_size();
    for (int t = 0; t < block.nt; ++t)
        for (std::size_t k = 0; k < fs; ++k) {
            const auto z = filtered(static_cast<Eigen::Index>(k), t);
            out.data[static_cast<std::size_t>(t) * fs + k] = cfloat(static_cast<float>(z.real()), static_cast<float>(z.imag()));
        }
    return out;
}

std::vector<double> casorati_singular_values(const IQBlock& block) {
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(casorati(block));
    const auto& s = svd.singularValues();
    return {s.data(), s.data() + s.size()};
}

ComplexFrame correlation_map(const ComplexFrame& frame, const PSFPatch& psf) {
    const ComplexFrame& k = psf.values;
    if (k.rows % 2 == 0 || k.cols % 2 == 0) throw ContractError("PSF must have odd sides");
    const int hr = k.rows / 2, hc = k.cols / 2;
    ComplexFrame out(frame.rows, frame.cols);
    for (int i = 0; i < frame.rows; ++i) {
        for (int j = 0; j < frame.cols; ++j) {
            std::complex<double> inner{};
            double energy = 0;
            for (int a = 0; a < k.rows; ++a) {
                const int ii = i + a - hr;
                if (ii < 0 || ii >= frame.rows) continue;
                for (int b = 0; b < k.cols; ++b) {
                    const int jj = j + b - hc;
                    if (jj < 0 || jj >= frame.cols) continue;
                    const std::complex<double> v(frame(ii, jj));
                    inner += v * std::conj(std::complex<double>(k(a, b)));
                    energy += std::norm(v);
                }
            }
            const std::complex<double> chi = inner / std::max(std::sqrt(energy), kCorrelationNormFloor);
            out(i, j) = cfloat(static_cast<float>(chi.real()), static_cast<float>(chi.imag()));
        }
    }
    return out;
}

CorrelationBlock assemble_block(const std::vector<ComplexFrame>& frames, int t0, int nt, int z0, int x0, int nz,
                                int nx) {
    if (nt < 1 || t0 < 0 || t0 + nt > static_cast<int>(frames.size()))
        throw ContractError("insufficient frames: need [" + std::to_string(t0) + ", " + std::to_string(t0 + nt) +
                            ") but have " + std::to_string(frames.size()));
    CorrelationBlock block(nt, nz, nx);
    for (int t = 0; t < nt; ++t) {
        const ComplexFrame& f = frames[static_cast<std::size_t>(t0 + t)];
        if (z0 < 0 || x0 < 0 || z0 + nz > f.rows || x0 + nx > f.cols)
            throw ContractError("spatial window exceeds frame");
        for (int z = 0; z < nz; ++z)
            for (int x = 0; x < nx; ++x) block(t, z, x) = f(z0 + z, x0 + x);
    }
    return block;
}

}  // namespace ulm
