#pragma once

// Synthetic microvascular graph, Poiseuille flow, microbubble transport and
// ground-truth track rasterization. Lengths are micrometers, velocities mm/s.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ulm/common.hpp"

namespace ulm {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    bool operator==(const Vec3&) const = default;
};

double dot(const Vec3& a, const Vec3& b);
double norm(const Vec3& v);
Vec3 cross(const Vec3& a, const Vec3& b);

// Radius bounds of the reference network before dilation.
inline constexpr double kMinRadiusUm = 1.0;
inline constexpr double kMaxRadiusUm = 28.6;

struct Edge {
    int a = 0;  // upstream node
    int b = 0;  // downstream node
    double radius_um = 0;
    bool operator==(const Edge&) const = default;
};

class VascularGraph {
public:
    std::vector<Vec3> nodes;
    std::vector<Edge> edges;
    Vec3 bbox_min;
    Vec3 bbox_max;
    // Cumulative dilation applied since generation; radii divided by this are
    // the pre-dilation radii that drive the velocity calibration.
    double dilation = 1.0;

    double edge_length(int e) const;
    Vec3 edge_direction(int e) const;
    double volume_mm3() const;
    // Outgoing edges (flow leaves the node) per node.
    std::vector<std::vector<int>> outgoing() const;

    // Throws ContractError naming the first broken invariant.
    void validate() const;
    bool connected() const;

    // Scales coordinates, radii and bounding box by factor.
    VascularGraph dilated(double factor) const;

    bool operator==(const VascularGraph&) const = default;
};

struct GraphConfig {
    Vec3 volume_um{250, 500, 250};  // pre-dilation extent (x lateral, y elevation, z depth)
    int vessel_count = 60;
    double min_radius_um = kMinRadiusUm;
    double max_radius_um = kMaxRadiusUm;
    double dilation = 2.0;
    double loop_fraction = 0.1;
    double segment_min_um = 25;
    double segment_max_um = 70;
    std::uint64_t seed = 7;
};

class GraphCapacityError : public std::runtime_error {
public:
    GraphCapacityError(int requested, int achieved);
    int requested;
    int achieved;
};

VascularGraph generate_synthetic_graph(const GraphConfig& cfg);

void write_graph(std::ostream& os, const VascularGraph& g);
VascularGraph read_graph(std::istream& is);
void save_graph(const std::string& path, const VascularGraph& g);
VascularGraph load_graph(const std::string& path);

// Two-point power law a * R^b through (1 um, 0.0093 mm/s) and (28.6 um, 5.4 mm/s).
struct VelocityLaw {
    double r_lo = kMinRadiusUm, v_lo = 0.0093;
    double r_hi = kMaxRadiusUm, v_hi = 5.4;

    double exponent() const;
    double prefactor() const;
    double operator()(double radius_um) const;
};

double mean_velocity(double radius_um);
double poiseuille_velocity(double rho_um, double radius_um, double v_mean);

struct FlowField {
    std::vector<double> v_mean_mm_s;  // centerline velocity per edge
    std::vector<int> direction;       // +1: flow a -> b

    static FlowField from_graph(const VascularGraph& g, const VelocityLaw& law = {});
};

struct Microbubble {
    int edge = 0;
    double s_um = 0;             // arc length from the upstream node
    double radial_fraction = 0;  // rho / R, constant over the bubble's life
    double angle = 0;            // azimuth around the edge axis

    double rho_um(const VascularGraph& g) const { return radial_fraction * g.edges[edge].radius_um; }
    bool operator==(const Microbubble&) const = default;
};

Vec3 position(const VascularGraph& g, const Microbubble& mb);

class MicrobubbleSampler {
public:
    explicit MicrobubbleSampler(const VascularGraph& g);
    Microbubble sample(Rng& rng) const;

private:
    const VascularGraph* graph_;
    std::vector<double> cumulative_length_;
};

std::vector<Microbubble> seed_microbubbles(const VascularGraph& g, double density_per_mm3, Rng& rng);

struct StepResult {
    std::vector<Vec3> positions;
    std::vector<bool> respawned;
};

// Advances every bubble by v_MB * dt along the graph; in-place.
StepResult step_microbubbles(const VascularGraph& g, const FlowField& flow, std::vector<Microbubble>& mbs,
                             double dt_s, Rng& rng);

struct TrajectoryPoint {
    int frame = 0;
    Vec3 pos;
};

using Trajectory = std::vector<TrajectoryPoint>;

// Frame-by-frame bubble positions for one block. A respawn closes the
// current trajectory and opens a new one.
struct BlockMotion {
    std::vector<Trajectory> trajectories;
    std::vector<std::vector<Vec3>> frames;  // positions per frame
};

BlockMotion simulate_block_motion(const VascularGraph& g, const FlowField& flow, double density_per_mm3,
                                  int n_frames, double dt_s, Rng& rng);

// Maps volume coordinates onto the imaging plane (lateral x, depth z); the
// elevation coordinate y is dropped.
struct Placement {
    double x_shift_um = 0;
    double z_shift_um = 0;

    double lateral(const Vec3& p) const { return p.x + x_shift_um; }
    double depth(const Vec3& p) const { return p.z + z_shift_um; }
};

// Beamforming-grid footprint of a block; corner is the outer edge of pixel (0, 0).
struct BlockGeometry {
    double corner_z_um = 0;
    double corner_x_um = 0;
    int nz = 32;
    int nx = 32;
    double pitch_um = 25.0;
};

BinaryImage rasterize_tracks(const std::vector<Trajectory>& trajectories, const BlockGeometry& geom,
                             const Placement& placement, int r);

}  // namespace ulm
