#pragma once

// Linear-array plane-wave simulation, IQ demodulation and delay-and-sum
// beamforming. SI units throughout (meters, seconds, hertz).

#include <vector>

#include "ulm/common.hpp"

namespace ulm {

struct ProbeConfig {
    int element_count = 128;
    double pitch_m = 0.1e-3;
    double element_width_m = 0.08e-3;
    double center_frequency_hz = 15.625e6;
    double elevation_focus_m = 8e-3;
    double sound_speed_m_s = 1540.0;

    double element_x(int e) const { return (e - 0.5 * (element_count - 1)) * pitch_m; }
    void validate() const;
};

struct SequenceConfig {
    double transmit_frequency_hz = 15e6;
    int cycles = 3;
    std::vector<double> angles_deg{-1.0, 0.0, 1.0};
    double prf_hz = 3000.0;
    double frame_rate_hz = 1000.0;
    double sampling_rate_hz = 62.5e6;
    int decimation = 4;  // RF -> IQ; 4 keeps a 100% bandwidth at the demodulation frequency
    double f_number = 1.0;

    double frame_period_s() const { return 1.0 / frame_rate_hz; }
    void validate(const ProbeConfig& probe) const;
};

// In-plane point scatterer. x is lateral (array axis), z depth.
struct Scatterer {
    double x_m = 0;
    double z_m = 0;
    double amplitude = 1.0;
};

// Pixel (i, j) is centered at (z0 + i * pitch, x0 + j * pitch).
struct ImageGrid {
    double z0_m = 0;
    double x0_m = 0;
    int nz = 0;
    int nx = 0;
    double pitch_m = 25e-6;

    double z(int i) const { return z0_m + i * pitch_m; }
    double x(int j) const { return x0_m + j * pitch_m; }
    bool operator==(const ImageGrid&) const = default;
};

// Channel data for one transmit; samples are [element][time].
struct RFFrame {
    int elements = 0;
    int samples = 0;
    double t0_s = 0;
    double fs_hz = 0;
    double angle_rad = 0;
    std::vector<float> data;

    float& at(int e, int n) { return data[static_cast<std::size_t>(e) * samples + n]; }
    float at(int e, int n) const { return data[static_cast<std::size_t>(e) * samples + n]; }
};

struct IQChannels {
    int elements = 0;
    int samples = 0;
    double t0_s = 0;
    double fs_hz = 0;
    double f_demod_hz = 0;
    double angle_rad = 0;
    std::vector<cfloat> data;

    cfloat& at(int e, int n) { return data[static_cast<std::size_t>(e) * samples + n]; }
    cfloat at(int e, int n) const { return data[static_cast<std::size_t>(e) * samples + n]; }
};

struct TimeWindow {
    double start_s = 0;
    double end_s = 0;
};

// Hann-windowed tone burst centered on t = 0.
double transmit_pulse(double t, double frequency_hz, int cycles);

double transmit_delay(double x_m, double z_m, double angle_rad, double c);
double receive_delay(double x_m, double z_m, double element_x_m, double c);

// Arrival-time span needed to beamform every pixel of grid, padded for the
// pulse and the demodulation filter.
TimeWindow recording_window(const ProbeConfig& probe, const SequenceConfig& seq, const ImageGrid& grid);

RFFrame simulate_channel_data(const std::vector<Scatterer>& scatterers, const ProbeConfig& probe,
                              const SequenceConfig& seq, double angle_rad, const TimeWindow& window);

IQChannels iq_demodulate(const RFFrame& rf, double f_demod_hz, int decimation);

ComplexFrame das_beamform(const IQChannels& iq, const ProbeConfig& probe, const SequenceConfig& seq,
                          const ImageGrid& grid);

ComplexFrame compound(const std::vector<ComplexFrame>& frames);

// simulate -> demodulate -> beamform for every steering angle, then compound.
ComplexFrame image_scatterers(const std::vector<Scatterer>& scatterers, const ProbeConfig& probe,
                              const SequenceConfig& seq, const ImageGrid& grid);

struct PSFPatch {
    ComplexFrame values;  // odd sides, unit Frobenius norm, peak at center
};

PSFPatch synthesize_psf(const ProbeConfig& probe, const SequenceConfig& seq, int rows = 9, int cols = 9,
                        double reference_depth_m = 4e-3, double pitch_m = 25e-6);

}  // namespace ulm
