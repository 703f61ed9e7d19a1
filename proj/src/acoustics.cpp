#include "ulm/acoustics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ulm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kFilterHalfTaps = 16;
constexpr double kSpreadingReference_m = 1e-3;

double sinc(double x) { return std::abs(x) < 1e-12 ? 1.0 : std::sin(x) / x; }

// Lowpass for the mixed-down RF: Hamming-windowed sinc, unit DC gain.
std::vector<double> demod_filter(double cutoff_cycles_per_sample) {
    std::vector<double> h(2 * kFilterHalfTaps + 1);
    double sum = 0;
    for (int k = -kFilterHalfTaps; k <= kFilterHalfTaps; ++k) {
        const double w = 0.54 + 0.46 * std::cos(kPi * k / (kFilterHalfTaps + 1));
        const double v = 2 * cutoff_cycles_per_sample * sinc(2 * kPi * cutoff_cycles_per_sample * k) * w;
        h[static_cast<std::size_t>(k + kFilterHalfTaps)] = v;
        sum += v;
    }
    for (double& v : h) v /= sum;
    return h;
}

}  // namespace

void ProbeConfig::validate() const {
    if (element_count < 2) throw ContractError("probe needs at least two elements");
    if (!(pitch_m > element_width_m && element_width_m > 0)) throw ContractError("require pitch > element width > 0");
    if (!(sound_speed_m_s > 0 && center_frequency_hz > 0)) throw ContractError("invalid probe frequencies");
}

void SequenceConfig::validate(const ProbeConfig& probe) const {
    if (angles_deg.empty()) throw ContractError("at least one steering angle required");
    if (std::abs(prf_hz - frame_rate_hz * static_cast<double>(angles_deg.size())) > 1e-6 * prf_hz)
        throw ContractError("PRF must equal frame rate times the number of angles");
    if (sampling_rate_hz < 4 * transmit_frequency_hz - 1e-6)
        throw ContractError("RF sampling rate must be at least 4x the transmit frequency");
    if (decimation < 1 || cycles < 1 || !(f_number > 0)) throw ContractError("invalid sequence parameters");
    (void)probe;
}

double transmit_pulse(double t, double frequency_hz, int cycles) {
    const double duration = cycles / frequency_hz;
    if (std::abs(t) > 0.5 * duration) return 0.0;
    const double window = 0.5 * (1.0 + std::cos(2 * kPi * t / duration));
    return window * std::cos(2 * kPi * frequency_hz * t);
}

double transmit_delay(double x_m, double z_m, double angle_rad, double c) {
    return (z_m * std::cos(angle_rad) + x_m * std::sin(angle_rad)) / c;
}

double receive_delay(double x_m, double z_m, double element_x_m, double c) {
    return std::hypot(z_m, x_m - element_x_m) / c;
}

TimeWindow recording_window(const ProbeConfig& probe, const SequenceConfig& seq, const ImageGrid& grid) {
    const double c = probe.sound_speed_m_s;
    const double z_lo = grid.z(0), z_hi = grid.z(grid.nz - 1);
    const double x_lo = grid.x(0), x_hi = grid.x(grid.nx - 1);
    double tx_min = 1e9, tx_max = -1e9;
    for (double a_deg : seq.angles_deg) {
        const double a = a_deg * kPi / 180.0;
        for (double z : {z_lo, z_hi}) {
            for (double x : {x_lo, x_hi}) {
                tx_min = std::min(tx_min, transmit_delay(x, z, a, c));
                tx_max = std::max(tx_max, transmit_delay(x, z, a, c));
            }
        }
    }
    const double half_aperture = z_hi / (2 * seq.f_number);
    double rx_min = 1e9, rx_max = -1e9;
    for (int e = 0; e < probe.element_count; ++e) {
        const double xe = probe.element_x(e);
        const double nearest = std::clamp(xe, x_lo, x_hi);
        if (std::abs(xe - nearest) > half_aperture) continue;
        rx_min = std::min(rx_min, receive_delay(nearest, z_lo, xe, c));
        const double far = std::abs(xe - x_lo) > std::abs(xe - x_hi) ? x_lo : x_hi;
        rx_max = std::max(rx_max, receive_delay(far, z_hi, xe, c));
    }
    if (rx_min > rx_max) rx_min = rx_max = z_lo / c;
    const double pad = 0.5 * seq.cycles / seq.transmit_frequency_hz +
                       (kFilterHalfTaps + 2.0 * seq.decimation) / seq.sampling_rate_hz;
    return {std::max(0.0, tx_min + rx_min - pad), tx_max + rx_max + pad};
}

RFFrame simulate_channel_data(const std::vector<Scatterer>& scatterers, const ProbeConfig& probe,
                              const SequenceConfig& seq, double angle_rad, const TimeWindow& window) {
    RFFrame rf;
    rf.elements = probe.element_count;
    rf.fs_hz = seq.sampling_rate_hz;
    rf.t0_s = window.start_s;
    rf.angle_rad = angle_rad;
    rf.samples = std::max(1, static_cast<int>(std::ceil((window.end_s - window.start_s) * rf.fs_hz)));
    rf.data.assign(static_cast<std::size_t>(rf.elements) * rf.samples, 0.0f);

    const double c = probe.sound_speed_m_s;
    const double lambda = c / seq.transmit_frequency_hz;
    const double half = 0.5 * seq.cycles / seq.transmit_frequency_hz;
    for (const Scatterer& s : scatterers) {
        if (s.z_m < 0) throw ContractError("scatterer behind the array (negative depth)");
        if (!std::isfinite(s.amplitude) || !std::isfinite(s.x_m) || !std::isfinite(s.z_m))
            throw ContractError("scatterer values must be finite");
        const double t_tx = transmit_delay(s.x_m, s.z_m, angle_rad, c);
        for (int e = 0; e < rf.elements; ++e) {
            const double xe = probe.element_x(e);
            const double r = std::hypot(s.z_m, s.x_m - xe);
            const double sin_theta = r > 0 ? (s.x_m - xe) / r : 0.0;
            const double directivity = sinc(kPi * probe.element_width_m * sin_theta / lambda);
            const double gain = s.amplitude * directivity * kSpreadingReference_m / std::max(r, 1e-6);
            const double tau = t_tx + r / c;
            const int n_lo = std::max(0, static_cast<int>(std::ceil((tau - half - rf.t0_s) * rf.fs_hz)));
            const int n_hi = std::min(rf.samples - 1, static_cast<int>(std::floor((tau + half - rf.t0_s) * rf.fs_hz)));
            for (int n = n_lo; n <= n_hi; ++n) {
                const double t = rf.t0_s + n / rf.fs_hz;
                rf.at(e, n) += static_cast<float>(gain * transmit_pulse(t - tau, seq.transmit_frequency_hz, seq.cycles));
            }
        }
    }
    return rf;
}

IQChannels iq_demodulate(const RFFrame& rf, double f_demod_hz, int decimation) {
    if (decimation < 1) throw ContractError("decimation must be >= 1");
    IQChannels iq;
    iq.elements = rf.elements;
    iq.t0_s = rf.t0_s;
    iq.fs_hz = rf.fs_hz / decimation;
    iq.f_demod_hz = f_demod_hz;
    iq.angle_rad = rf.angle_rad;
    iq.samples = (rf.samples + decimation - 1) / decimation;
    iq.data.assign(static_cast<std::size_t>(iq.elements) * iq.samples, cfloat{});

    // 100% bandwidth: keep |f| < f_demod / 2 around the carrier.
    const auto h = demod_filter(0.5 * f_demod_hz / rf.fs_hz);
    std::vector<std::complex<double>> carrier(static_cast<std::size_t>(rf.samples));
    for (int n = 0; n < rf.samples; ++n) {
        const double t = rf.t0_s + n / rf.fs_hz;
        carrier[static_cast<std::size_t>(n)] = std::polar(1.0, -2 * kPi * f_demod_hz * t);
    }
    for (int e = 0; e < rf.elements; ++e) {
        for (int m = 0; m < iq.samples; ++m) {
            const int n = m * decimation;
            std::complex<double> acc{};
            for (int k = -kFilterHalfTaps; k <= kFilterHalfTaps; ++k) {
                const int idx = n - k;
                if (idx < 0 || idx >= rf.samples) continue;
                const float v = rf.at(e, idx);
                if (v == 0.0f) continue;
                acc += h[static_cast<std::size_t>(k + kFilterHalfTaps)] * static_cast<double>(v) *
                       carrier[static_cast<std::size_t>(idx)];
            }
            iq.at(e, m) = cfloat(static_cast<float>(2 * acc.real()), static_cast<float>(2 * acc.imag()));
        }
    }
    return iq;
}

ComplexFrame das_beamform(const IQChannels& iq, const ProbeConfig& probe, const SequenceConfig& seq,
                          const ImageGrid& grid) {
    ComplexFrame out(grid.nz, grid.nx);
    const double c = probe.sound_speed_m_s;
    for (int i = 0; i < grid.nz; ++i) {
        const double z = grid.z(i);
        const double half_aperture = z / (2 * seq.f_number);
        for (int j = 0; j < grid.nx; ++j) {
            const double x = grid.x(j);
            const double t_tx = transmit_delay(x, z, iq.angle_rad, c);
            std::complex<double> acc{};
            for (int e = 0; e < iq.elements; ++e) {
                const double dx = probe.element_x(e) - x;
                if (std::abs(dx) >= half_aperture) continue;
                const double w = 0.5 * (1.0 + std::cos(kPi * dx / half_aperture));
                const double tau = t_tx + std::hypot(z, dx) / c;
                const double pos = (tau - iq.t0_s) * iq.fs_hz;
                const double base = std::floor(pos);
                const int i0 = static_cast<int>(base);
                if (i0 < 0 || i0 + 1 >= iq.samples) continue;
                const double f = pos - base;
                const std::complex<double> a(iq.at(e, i0)), b(iq.at(e, i0 + 1));
                acc += w * ((1.0 - f) * a + f * b) * std::polar(1.0, 2 * kPi * iq.f_demod_hz * tau);
            }
            out(i, j) = cfloat(static_cast<float>(acc.real()), static_cast<float>(acc.imag()));
        }
    }
    return out;
}

ComplexFrame compound(const std::vector<ComplexFrame>& frames) {
    if (frames.empty()) throw ContractError("compound needs at least one frame");
    ComplexFrame out(frames.front().rows, frames.front().cols);
    for (const auto& f : frames)
        if (!f.same_shape(out)) throw ContractError("compound: mismatched frame grids");
    const float inv = 1.0f / static_cast<float>(frames.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        cfloat acc{};
        for (const auto& f : frames) acc += f.data[k];
        out.data[k] = acc * inv;
    }
    return out;
}

ComplexFrame image_scatterers(const std::vector<Scatterer>& scatterers, const ProbeConfig& probe,
                              const SequenceConfig& seq, const ImageGrid& grid) {
    const TimeWindow window = recording_window(probe, seq, grid);
    std::vector<ComplexFrame> per_angle;
    per_angle.reserve(seq.angles_deg.size());
    for (double a_deg : seq.angles_deg) {
        const double a = a_deg * kPi / 180.0;
        const RFFrame rf = simulate_channel_data(scatterers, probe, seq, a, window);
        const IQChannels iq = iq_demodulate(rf, probe.center_frequency_hz, seq.decimation);
        per_angle.push_back(das_beamform(iq, probe, seq, grid));
    }
    return compound(per_angle);
}

PSFPatch synthesize_psf(const ProbeConfig& probe, const SequenceConfig& seq, int rows, int cols,
                        double reference_depth_m, double pitch_m) {
    if (rows % 2 == 0 || cols % 2 == 0 || rows < 1 || cols < 1) throw ContractError("PSF sides must be odd");
    const int margin = 2;
    ImageGrid grid;
    grid.nz = rows + 2 * margin;
    grid.nx = cols + 2 * margin;
    grid.pitch_m = pitch_m;
    grid.z0_m = reference_depth_m - (grid.nz / 2) * pitch_m;
    grid.x0_m = -(grid.nx / 2) * pitch_m;
    const ComplexFrame img = image_scatterers({{0.0, reference_depth_m, 1.0}}, probe, seq, grid);

    int pi = grid.nz / 2, pj = grid.nx / 2;
    float best = -1;
    for (int i = rows / 2; i < grid.nz - rows / 2; ++i)
        for (int j = cols / 2; j < grid.nx - cols / 2; ++j)
            if (std::abs(img(i, j)) > best) {
                best = std::abs(img(i, j));
                pi = i;
                pj = j;
            }
    PSFPatch psf{ComplexFrame(rows, cols)};
    double energy = 0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            const cfloat v = img(pi - rows / 2 + i, pj - cols / 2 + j);
            psf.values(i, j) = v;
            energy += std::norm(std::complex<double>(v));
        }
    const float scale = static_cast<float>(1.0 / std::sqrt(energy));
    for (cfloat& v : psf.values.data) v *= scale;
    return psf;
}

}  // namespace ulm
