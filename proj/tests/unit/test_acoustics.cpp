#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ulm/acoustics.hpp"

using namespace ulm;

namespace {

constexpr double kPi = std::numbers::pi;

ImageGrid grid_around(double x_m, double z_m, int half, double pitch = 25e-6) {
    ImageGrid g;
    g.nz = g.nx = 2 * half + 1;
    g.pitch_m = pitch;
    g.z0_m = z_m - half * pitch;
    g.x0_m = x_m - half * pitch;
    return g;
}

std::pair<int, int> argmax(const ComplexFrame& f) {
    int bi = 0, bj = 0;
    float best = -1;
    for (int i = 0; i < f.rows; ++i)
        for (int j = 0; j < f.cols; ++j)
            if (std::abs(f(i, j)) > best) {
                best = std::abs(f(i, j));
                bi = i;
                bj = j;
            }
    return {bi, bj};
}

float peak(const ComplexFrame& f) {
    auto [i, j] = argmax(f);
    return std::abs(f(i, j));
}

// Pixels at or above half the row maximum along one row.
int width_6db(const ComplexFrame& f, int row) {
    float m = 0;
    for (int j = 0; j < f.cols; ++j) m = std::max(m, std::abs(f(row, j)));
    int n = 0;
    for (int j = 0; j < f.cols; ++j) n += std::abs(f(row, j)) >= 0.5f * m;
    return n;
}

}  // namespace

TEST_SUITE("acoustics") {

TEST_CASE("empty scene and zero channels") {
    const ProbeConfig probe;
    const SequenceConfig seq;
    const RFFrame rf = simulate_channel_data({}, probe, seq, 0.0, {3e-6, 8e-6});
    for (float v : rf.data) CHECK(v == 0.0f);
    const IQChannels iq = iq_demodulate(rf, probe.center_frequency_hz, seq.decimation);
    for (cfloat v : iq.data) CHECK(v == cfloat{});
    const ComplexFrame img = das_beamform(iq, probe, seq, grid_around(0, 4e-3, 3));
    for (cfloat v : img.data) CHECK(v == cfloat{});
}

TEST_CASE("echo arrives at the round-trip time") {
    const ProbeConfig probe;
    const SequenceConfig seq;
    const int e = 70;
    for (double d : {2.5e-3, 4e-3, 6.1e-3}) {
        const RFFrame rf = simulate_channel_data({{probe.element_x(e), d, 1.0}}, probe, seq, 0.0, {0, 2 * d / 1540 + 2e-6});
        int best = 0;
        for (int n = 0; n < rf.samples; ++n)
            if (std::abs(rf.at(e, n)) > std::abs(rf.at(e, best))) best = n;
        const double t = rf.t0_s + best / rf.fs_hz;
        CHECK(std::abs(t - 2 * d / probe.sound_speed_m_s) <= 0.5 / rf.fs_hz + 1e-12);
    }
}

TEST_CASE("channel data is linear in the scatterers") {
    const ProbeConfig probe;
    const SequenceConfig seq;
    Rng rng(12);
    for (int trial = 0; trial < 5; ++trial) {
        const Scatterer s1{(uniform01(rng) - 0.5) * 2e-3, 3e-3 + 2e-3 * uniform01(rng), 0.5 + uniform01(rng)};
        const Scatterer s2{(uniform01(rng) - 0.5) * 2e-3, 3e-3 + 2e-3 * uniform01(rng), 0.5 + uniform01(rng)};
        const TimeWindow w{3e-6, 8e-6};
        const RFFrame a = simulate_channel_data({s1}, probe, seq, 0.01, w);
        const RFFrame b = simulate_channel_data({s2}, probe, seq, 0.01, w);
        const RFFrame ab = simulate_channel_data({s1, s2}, probe, seq, 0.01, w);
        double num = 0, den = 0;
        for (std::size_t k = 0; k < ab.data.size(); ++k) {
            num += std::pow(double(ab.data[k]) - a.data[k] - b.data[k], 2);
            den += std::pow(double(ab.data[k]), 2);
        }
        CHECK(std::sqrt(num / den) < 1e-6);
    }
}

TEST_CASE("demodulating a carrier tone gives a constant phasor") {
    for (double phi : {0.0, 0.7, -2.0, 3.0}) {
        RFFrame rf;
        rf.elements = 1;
        rf.samples = 2000;
        rf.fs_hz = 62.5e6;
        rf.t0_s = 1e-6;
        rf.data.resize(2000);
        const double f = 15.625e6;
        for (int n = 0; n < rf.samples; ++n) rf.at(0, n) = float(std::cos(2 * kPi * f * (rf.t0_s + n / rf.fs_hz) + phi));
        const IQChannels iq = iq_demodulate(rf, f, 4);
        for (int m = 50; m < iq.samples - 50; ++m) {
            CHECK(std::abs(std::abs(iq.at(0, m)) - 1.0f) < 0.01f);
            const double dphi = std::remainder(std::arg(iq.at(0, m)) - phi, 2 * kPi);
            CHECK(std::abs(dphi) < 0.01);
        }
    }
}

TEST_CASE("beamformed point response peaks at the scatterer") {
    const ProbeConfig probe;
    const SequenceConfig seq;
    Rng rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        const double x = (uniform01(rng) - 0.5) * 2e-3, z = 3e-3 + 2e-3 * uniform01(rng);
        const ImageGrid g = grid_around(x, z, 6);
        const ComplexFrame img = image_scatterers({{x, z, 1.0}}, probe, seq, g);
        auto [i, j] = argmax(img);
        CHECK(std::hypot(g.z(i) - z, g.x(j) - x) <= 12.5e-6);
    }
}

TEST_CASE("beamforming scales linearly and shifts with the scatterer") {
    const ProbeConfig probe;
    const SequenceConfig seq;
    const ImageGrid g = grid_around(0, 4e-3, 10);
    const ComplexFrame a = image_scatterers({{0, 4e-3, 1.0}}, probe, seq, g);
    const ComplexFrame a3 = image_scatterers({{0, 4e-3, 3.0}}, probe, seq, g);
    const ComplexFrame s = image_scatterers({{25e-6, 4e-3, 1.0}}, probe, seq, g);
    const float pk = peak(a);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a3.data[k] - 3.0f * a.data[k]) <= 1e-5f * 3 * pk);
    float worst = 0;
    for (int i = 3; i < g.nz - 3; ++i)
        for (int j = 3; j < g.nx - 3; ++j) worst = std::max(worst, std::abs(s(i, j + 1) - a(i, j)));
    CHECK(worst < 0.05f * pk);
}

TEST_CASE("compounding") {
    ComplexFrame f(3, 4);
    for (std::size_t k = 0; k < f.size(); ++k) f.data[k] = cfloat(float(k), -0.5f * float(k));
    const ComplexFrame same = compound({f, f, f});
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(std::abs(same.data[k] - f.data[k]) < 1e-5f);
    ComplexFrame neg = f;
    for (auto& v : neg.data) v = -v;
    const ComplexFrame zero = compound({f, neg, ComplexFrame(3, 4)});
    for (auto v : zero.data) CHECK(v == cfloat{});
    CHECK_THROWS_AS(compound({}), ContractError);
    CHECK_THROWS_AS(compound({f, ComplexFrame(2, 2)}), ContractError);

    const ProbeConfig probe;
    SequenceConfig multi;
    multi.angles_deg = {-3, -1.5, 0, 1.5, 3};
    multi.prf_hz = 5000;
    SequenceConfig single;
    single.angles_deg = {3};
    single.prf_hz = 1000;
    const ImageGrid g = grid_around(0, 4e-3, 12);
    const ComplexFrame cm = image_scatterers({{0, 4e-3, 1.0}}, probe, multi, g);
    const ComplexFrame cs = image_scatterers({{0, 4e-3, 1.0}}, probe, single, g);
    CHECK(width_6db(cm, 12) <= width_6db(cs, 12));
}

TEST_CASE("synthesized PSF") {
    const ProbeConfig probe;
    const SequenceConfig seq;
    const PSFPatch psf = synthesize_psf(probe, seq);
    REQUIRE(psf.values.rows == 9);
    REQUIRE(psf.values.cols == 9);
    double energy = 0;
    for (auto v : psf.values.data) energy += std::norm(std::complex<double>(v));
    CHECK(energy == doctest::Approx(1.0).epsilon(1e-6));
    auto [i, j] = argmax(psf.values);
    CHECK(i == 4);
    CHECK(j == 4);
    int axial = 0;
    const float m = std::abs(psf.values(4, 4));
    for (int k = 0; k < 9; ++k) axial += std::abs(psf.values(k, 4)) >= 0.5f * m;
    const double lambda = probe.sound_speed_m_s / seq.transmit_frequency_hz;
    CHECK(axial * 25e-6 >= 0.5 * lambda);
    CHECK(axial * 25e-6 <= 3 * lambda);
    for (auto v : psf.values.data) CHECK(std::isfinite(std::abs(v)));
    CHECK_THROWS_AS(synthesize_psf(probe, seq, 8, 9), ContractError);
}

TEST_CASE("configuration checks") {
    ProbeConfig p;
    p.element_width_m = 0.2e-3;
    CHECK_THROWS_AS(p.validate(), ContractError);
    SequenceConfig s;
    s.prf_hz = 2000;
    CHECK_THROWS_AS(s.validate(ProbeConfig{}), ContractError);
    CHECK_THROWS_AS(simulate_channel_data({{0, -1e-3, 1}}, ProbeConfig{}, SequenceConfig{}, 0, {0, 1e-6}), ContractError);
}

}  // TEST_SUITE
