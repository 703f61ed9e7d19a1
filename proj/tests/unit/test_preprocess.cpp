#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>

#include "ulm/preprocess.hpp"

using namespace ulm;

namespace {

IQBlock random_block(int nt, int nz, int nx, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<float> n(0.0f, 1.0f);
    IQBlock b(nt, nz, nx);
    for (auto& v : b.data) v = cfloat(n(rng), n(rng));
    return b;
}

double energy(const IQBlock& b) {
    double e = 0;
    for (auto v : b.data) e += std::norm(std::complex<double>(v));
    return e;
}

double diff_energy(const IQBlock& a, const IQBlock& b) {
    double e = 0;
    for (std::size_t k = 0; k < a.data.size(); ++k) e += std::norm(std::complex<double>(a.data[k] - b.data[k]));
    return e;
}

// Removes the temporal component v from every pixel: x - (x v) v^H.
IQBlock project_out(const IQBlock& b, const Eigen::VectorXcd& v) {
    IQBlock out = b;
    for (int z = 0; z < b.nz; ++z)
        for (int x = 0; x < b.nx; ++x) {
            std::complex<double> c{};
            for (int t = 0; t < b.nt; ++t) c += std::complex<double>(b(t, z, x)) * v(t);
            for (int t = 0; t < b.nt; ++t) out(t, z, x) -= cfloat(c * std::conj(v(t)));
        }
    return out;
}

PSFPatch unit_psf(std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<float> n(0.0f, 1.0f);
    PSFPatch p{ComplexFrame(5, 5)};
    double e = 0;
    for (auto& v : p.values.data) {
        v = cfloat(n(rng), n(rng));
        e += std::norm(v);
    }
    for (auto& v : p.values.data) v /= float(std::sqrt(e));
    return p;
}

}  // namespace

TEST_SUITE("preprocess") {

TEST_CASE("SVD filter edge cutoffs") {
    const IQBlock b = random_block(12, 3, 4, 1);
    const IQBlock same = svd_clutter_filter(b, 0);
    CHECK(diff_energy(same, b) <= 1e-10 * energy(b));
    const IQBlock zero = svd_clutter_filter(b, 12);
    CHECK(energy(zero) == 0.0);
    CHECK_THROWS_AS(svd_clutter_filter(b, 13), ContractError);
    CHECK_THROWS_AS(svd_clutter_filter(b, -1), ContractError);
}

TEST_CASE("singular values are nonincreasing") {
    const auto s = casorati_singular_values(random_block(20, 4, 5, 2));
    REQUIRE(s.size() == 20);
    for (std::size_t k = 1; k < s.size(); ++k) CHECK(s[k] <= s[k - 1]);
}

TEST_CASE("SVD filter removes static tissue and keeps moving bubbles") {
    const int nt = 64, nz = 12, nx = 12;
    IQBlock tissue(nt, nz, nx), mb(nt, nz, nx);
    Rng rng(5);
    std::normal_distribution<float> n(0.0f, 1.0f);
    Image2D<cfloat> img(nz, nx);
    for (auto& v : img.data) v = cfloat(n(rng), n(rng));
    for (int t = 0; t < nt; ++t) tissue.set_frame(t, img);
    for (int t = 0; t < nt; ++t) {
        const double zc = 2 + 8.0 * t / nt, xc = 3 + 6.0 * std::sin(0.2 * t);
        for (int z = 0; z < nz; ++z)
            for (int x = 0; x < nx; ++x)
                mb(t, z, x) = cfloat(std::polar(std::exp(-((z - zc) * (z - zc) + (x - xc) * (x - xc)) / 1.5), 0.3 * t));
    }
    // Tissue 40 dB above the bubble signal.
    const double scale = std::sqrt(1e4 * energy(mb) / energy(tissue));
    for (auto& v : tissue.data) v *= float(scale);
    IQBlock mix = tissue;
    for (std::size_t k = 0; k < mix.data.size(); ++k) mix.data[k] += mb.data[k];

    const IQBlock out = svd_clutter_filter(mix, 1);
    Eigen::MatrixXcd cas(nz * nx, nt);
    for (int t = 0; t < nt; ++t)
        for (int k = 0; k < nz * nx; ++k) cas(k, t) = std::complex<double>(mix.data[std::size_t(t) * nz * nx + k]);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(cas, Eigen::ComputeThinV);
    const Eigen::VectorXcd v1 = svd.matrixV().col(0);
    const IQBlock tissue_left = project_out(tissue, v1);
    const IQBlock mb_left = project_out(mb, v1);

    IQBlock sum = tissue_left;
    for (std::size_t k = 0; k < sum.data.size(); ++k) sum.data[k] += mb_left.data[k];
    CHECK(diff_energy(sum, out) <= 1e-6 * energy(out));
    CHECK(energy(tissue_left) < 0.01 * energy(tissue));
    CHECK(energy(mb_left) > 0.9 * energy(mb));
}

TEST_CASE("SVD filter is idempotent on its own output when the clutter has rank k") {
    const int nt = 16;
    IQBlock tissue(nt, 4, 4);
    Image2D<cfloat> img(4, 4);
    for (std::size_t k = 0; k < img.size(); ++k) img.data[k] = cfloat(float(k) + 1, 0.5f);
    for (int t = 0; t < nt; ++t) tissue.set_frame(t, img);
    const IQBlock once = svd_clutter_filter(tissue, 1);
    const IQBlock twice = svd_clutter_filter(once, 1);
    CHECK(energy(once) <= 1e-8 * energy(tissue));
    CHECK(diff_energy(once, twice) <= 1e-10 * energy(tissue));

    // A second pass on generic data removes the next singular component.
    const IQBlock b = random_block(10, 3, 3, 9);
    const auto s = casorati_singular_values(b);
    const auto s1 = casorati_singular_values(svd_clutter_filter(svd_clutter_filter(b, 2), 2));
    CHECK(s1[0] == doctest::Approx(s[4]).epsilon(1e-4));
}

TEST_CASE("correlation with the PSF itself is one") {
    const PSFPatch psf = unit_psf(3);
    ComplexFrame frame(11, 13);
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) frame(4 + a - 2, 6 + b - 2) = psf.values(a, b) * cfloat(2.5f, -1.0f);
    const ComplexFrame chi = correlation_map(frame, psf);
    CHECK(std::abs(chi(4, 6)) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("correlation of an orthogonal frame vanishes") {
    PSFPatch psf{ComplexFrame(1, 3)};
    psf.values(0, 0) = cfloat(float(1 / std::sqrt(2.0)), 0);
    psf.values(0, 2) = -psf.values(0, 0);
    ComplexFrame frame(4, 9);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 9; j += 2) frame(i, j) = cfloat(1.0f + i, -2.0f);
    for (auto v : correlation_map(frame, psf).data) CHECK(std::abs(v) < 1e-7f);
    for (auto v : correlation_map(ComplexFrame(5, 5), unit_psf(1)).data) CHECK(v == cfloat{});
}

TEST_CASE("correlation magnitude is bounded and scale invariant") {
    const PSFPatch psf = unit_psf(7);
    const IQBlock b = random_block(20, 16, 16, 8);
    for (int t = 0; t < b.nt; ++t) {
        const ComplexFrame f = b.frame(t);
        ComplexFrame g = f;
        for (auto& v : g.data) v *= 37.5f;
        const ComplexFrame c1 = correlation_map(f, psf), c2 = correlation_map(g, psf);
        for (std::size_t k = 0; k < c1.size(); ++k) {
            CHECK(std::abs(c1.data[k]) <= 1.0f + 1e-6f);
            CHECK(std::abs(std::abs(c1.data[k]) - std::abs(c2.data[k])) < 1e-6f);
        }
    }
    PSFPatch even{ComplexFrame(2, 3)};
    CHECK_THROWS_AS(correlation_map(ComplexFrame(4, 4), even), ContractError);
}

TEST_CASE("block assembly") {
    std::vector<ComplexFrame> frames(512, ComplexFrame(40, 40));
    for (int t = 0; t < 512; ++t)
        for (int i = 0; i < 40; ++i)
            for (int j = 0; j < 40; ++j) frames[std::size_t(t)](i, j) = cfloat(float(t), float(i * 40 + j));
    const CorrelationBlock b = assemble_block(frames, 0, 512, 4, 4, 32, 32);
    CHECK(b.nt == 512);
    CHECK(b.nz == 32);
    CHECK(b.nx == 32);
    CHECK(b.nz * 25.0 == 800.0);
    CHECK(b(7, 3, 5) == cfloat(7.0f, float((4 + 3) * 40 + 4 + 5)));

    const CorrelationBlock one = assemble_block(frames, 100, 1, 0, 0, 8, 8);
    CHECK(one.nt == 1);
    CHECK(one(0, 0, 0) == cfloat(100.0f, 0.0f));

    const CorrelationBlock a1 = assemble_block(frames, 0, 4, 0, 0, 8, 8);
    const CorrelationBlock a2 = assemble_block(frames, 4, 4, 0, 8, 8, 8);
    for (auto u : a1.data)
        for (auto v : a2.data) CHECK_FALSE(u == v);

    CHECK_THROWS_AS(assemble_block(frames, 500, 13, 0, 0, 8, 8), ContractError);
    CHECK_THROWS_AS(assemble_block(frames, 0, 4, 36, 0, 8, 8), ContractError);
}

}  // TEST_SUITE
