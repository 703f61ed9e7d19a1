#include "ulm/vasculature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>

namespace ulm {

double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

namespace {

Vec3 normalized(const Vec3& v) {
    const double n = norm(v);
    return n > 0 ? v * (1.0 / n) : Vec3{1, 0, 0};
}

Vec3 random_unit(Rng& rng) {
    const double z = 2 * uniform01(rng) - 1;
    const double phi = 2 * std::numbers::pi * uniform01(rng);
    const double s = std::sqrt(std::max(0.0, 1 - z * z));
    return {s * std::cos(phi), s * std::sin(phi), z};
}

bool inside(const Vec3& p, const Vec3& lo, const Vec3& hi) {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
}

}  // namespace

double VascularGraph::edge_length(int e) const {
    const Edge& ed = edges[static_cast<std::size_t>(e)];
    return norm(nodes[static_cast<std::size_t>(ed.b)] - nodes[static_cast<std::size_t>(ed.a)]);
}

Vec3 VascularGraph::edge_direction(int e) const {
    const Edge& ed = edges[static_cast<std::size_t>(e)];
    return normalized(nodes[static_cast<std::size_t>(ed.b)] - nodes[static_cast<std::size_t>(ed.a)]);
}

double VascularGraph::volume_mm3() const {
    const Vec3 d = bbox_max - bbox_min;
    return d.x * d.y * d.z * 1e-9;
}

std::vector<std::vector<int>> VascularGraph::outgoing() const {
    std::vector<std::vector<int>> out(nodes.size());
    for (std::size_t e = 0; e < edges.size(); ++e) out[static_cast<std::size_t>(edges[e].a)].push_back(static_cast<int>(e));
    return out;
}

bool VascularGraph::connected() const {
    if (nodes.empty()) return true;
    std::vector<std::vector<int>> adj(nodes.size());
    for (const Edge& e : edges) {
        adj[static_cast<std::size_t>(e.a)].push_back(e.b);
        adj[static_cast<std::size_t>(e.b)].push_back(e.a);
    }
    std::vector<bool> seen(nodes.size(), false);
    std::queue<int> q;
    q.push(0);
    seen[0] = true;
    std::size_t count = 1;
    while (!q.empty()) {
        const int n = q.front();
        q.pop();
        for (int m : adj[static_cast<std::size_t>(n)]) {
            if (!seen[static_cast<std::size_t>(m)]) {
                seen[static_cast<std::size_t>(m)] = true;
                ++count;
                q.push(m);
            }
        }
    }
    return count == nodes.size();
}

void VascularGraph::validate() const {
    const int n = static_cast<int>(nodes.size());
    const double tol = 1e-9;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Edge& e = edges[i];
        if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n)
            throw ContractError("edge " + std::to_string(i) + " references a missing node");
        if (!(edge_length(static_cast<int>(i)) > 0))
            throw ContractError("edge " + std::to_string(i) + " has zero length");
        const double r0 = e.radius_um / dilation;
        if (r0 < kMinRadiusUm - tol || r0 > kMaxRadiusUm + tol)
            throw ContractError("edge " + std::to_string(i) + " radius out of range");
    }
    if (!connected()) throw ContractError("graph is not a single connected component");
}

VascularGraph VascularGraph::dilated(double factor) const {
    if (!(factor > 0)) throw ContractError("dilation factor must be positive");
    VascularGraph g = *this;
    for (Vec3& p : g.nodes) p = p * factor;
    for (Edge& e : g.edges) e.radius_um *= factor;
    g.bbox_min = bbox_min * factor;
    g.bbox_max = bbox_max * factor;
    g.dilation = dilation * factor;
    return g;
}

GraphCapacityError::GraphCapacityError(int req, int ach)
    : std::runtime_error("vessel count " + std::to_string(req) + " does not fit the volume; achieved " +
                         std::to_string(ach)),
      requested(req),
      achieved(ach) {}

VascularGraph generate_synthetic_graph(const GraphConfig& cfg) {
    if (!(cfg.volume_um.x > 0 && cfg.volume_um.y > 0 && cfg.volume_um.z > 0))
        throw ContractError("volume size must be positive");
    if (cfg.vessel_count < 1) throw ContractError("vessel count must be at least 1");
    if (!(cfg.min_radius_um >= kMinRadiusUm && cfg.max_radius_um <= kMaxRadiusUm &&
          cfg.min_radius_um <= cfg.max_radius_um))
        throw ContractError("radius bounds must lie within [1, 28.6] um");

    Rng rng(cfg.seed);
    const Vec3 lo{0, 0, 0};
    const Vec3 hi = cfg.volume_um;
    const int loops_wanted = static_cast<int>(std::lround(cfg.loop_fraction * cfg.vessel_count));
    const int tree_target = cfg.vessel_count - loops_wanted;

    VascularGraph g;
    g.bbox_min = lo;
    g.bbox_max = hi;
    std::vector<int> parent_edge;
    std::vector<int> child_count;
    std::vector<int> depth;
    std::vector<Vec3> heading;

    // Root on the x = 0 face, heading into the volume.
    g.nodes.push_back({0.0, hi.y * (0.25 + 0.5 * uniform01(rng)), hi.z * (0.25 + 0.5 * uniform01(rng))});
    parent_edge.push_back(-1);
    child_count.push_back(0);
    depth.push_back(0);
    heading.push_back({1, 0, 0});

    const double min_spacing = 0.5 * cfg.segment_min_um;
    const int budget = 400 * cfg.vessel_count + 1000;
    auto grow = [&](int target) {
        int attempts = 0;
        while (static_cast<int>(g.edges.size()) < target && attempts < budget) {
            ++attempts;
            std::vector<int> candidates;
            for (std::size_t i = 0; i < g.nodes.size(); ++i) {
                const int max_children = parent_edge[i] < 0 ? 1 : 2;
                if (child_count[i] < max_children) candidates.push_back(static_cast<int>(i));
            }
            if (candidates.empty()) break;
            // Favor the newest tips so vessels extend before they ramify.
            const double u = uniform01(rng);
            const std::size_t pick = std::min(candidates.size() - 1,
                                              static_cast<std::size_t>((1.0 - u * u) * candidates.size()));
            const int from = candidates[pick];
            const double spread = child_count[static_cast<std::size_t>(from)] == 0 ? 0.6 : 1.2;
            Vec3 dir = normalized(heading[static_cast<std::size_t>(from)] + random_unit(rng) * spread);
            const double len = cfg.segment_min_um + (cfg.segment_max_um - cfg.segment_min_um) * uniform01(rng);
            const Vec3& o = g.nodes[static_cast<std::size_t>(from)];
            // Reflect off the walls the segment would cross so tips facing a wall can still grow.
            const Vec3 end = o + dir * len;
            if (end.x < lo.x || end.x > hi.x) dir.x = -dir.x;
            if (end.y < lo.y || end.y > hi.y) dir.y = -dir.y;
            if (end.z < lo.z || end.z > hi.z) dir.z = -dir.z;
            const Vec3 p = o + dir * len;
            if (!inside(p, lo, hi)) continue;
            bool crowded = false;
            for (const Vec3& q : g.nodes) {
                if (norm(q - p) < min_spacing) {
                    crowded = true;
                    break;
                }
            }
            if (crowded) continue;
            const int id = static_cast<int>(g.nodes.size());
            g.nodes.push_back(p);
            parent_edge.push_back(static_cast<int>(g.edges.size()));
            child_count.push_back(0);
            depth.push_back(depth[static_cast<std::size_t>(from)] + 1);
            heading.push_back(dir);
            ++child_count[static_cast<std::size_t>(from)];
            g.edges.push_back({from, id, 0.0});
        }
    };
    grow(tree_target);

    // Murray-like tapering from the root down; branch points split r^3.
    const auto out = g.outgoing();
    std::vector<double> inflow_radius(g.nodes.size(), cfg.max_radius_um);
    std::vector<double> split(g.nodes.size(), -1.0);
    for (std::size_t ei = 0; ei < g.edges.size(); ++ei) {  // tree edges are appended parent-first
        const int e = static_cast<int>(ei);
        Edge& ed = g.edges[ei];
        const double rp = inflow_radius[static_cast<std::size_t>(ed.a)];
        const auto& siblings = out[static_cast<std::size_t>(ed.a)];
        double r = rp;
        if (parent_edge[static_cast<std::size_t>(ed.a)] < 0) {
            r = cfg.max_radius_um;
        } else if (siblings.size() == 1) {
            r = rp * (0.88 + 0.12 * uniform01(rng));
        } else {
            double& alpha = split[static_cast<std::size_t>(ed.a)];
            if (alpha < 0) alpha = 0.25 + 0.5 * uniform01(rng);
            r = rp * std::cbrt(siblings.front() == e ? alpha : 1.0 - alpha);
        }
        r = std::clamp(r, cfg.min_radius_um, cfg.max_radius_um);
        ed.radius_um = r;
        inflow_radius[static_cast<std::size_t>(ed.b)] = r;
    }

    // Loop edges between nearby unconnected nodes, oriented by tree depth so
    // the directed graph stays acyclic.
    if (loops_wanted > 0) {
        std::vector<std::pair<int, int>> pairs;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            for (std::size_t j = i + 1; j < g.nodes.size(); ++j) {
                const double d = norm(g.nodes[i] - g.nodes[j]);
                if (d < cfg.segment_min_um || d > 1.5 * cfg.segment_max_um) continue;
                bool adjacent = false;
                for (const Edge& e : g.edges) {
                    if ((e.a == static_cast<int>(i) && e.b == static_cast<int>(j)) ||
                        (e.a == static_cast<int>(j) && e.b == static_cast<int>(i))) {
                        adjacent = true;
                        break;
                    }
                }
                if (!adjacent) pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
            }
        }
        std::shuffle(pairs.begin(), pairs.end(), rng);
        int added = 0;
        for (auto [i, j] : pairs) {
            if (added >= loops_wanted) break;
            const bool i_first = depth[static_cast<std::size_t>(i)] < depth[static_cast<std::size_t>(j)] ||
                                 (depth[static_cast<std::size_t>(i)] == depth[static_cast<std::size_t>(j)] && i < j);
            const int a = i_first ? i : j;
            const int b = i_first ? j : i;
            const double r = std::clamp(0.8 * std::min(inflow_radius[static_cast<std::size_t>(a)],
                                                       inflow_radius[static_cast<std::size_t>(b)]),
                                        cfg.min_radius_um, cfg.max_radius_um);
            g.edges.push_back({a, b, r});
            ++added;
        }
    }

    if (static_cast<int>(g.edges.size()) < cfg.vessel_count) {
        // Fall back to tree growth for loops the geometry could not host.
        const std::size_t before = g.edges.size();
        grow(cfg.vessel_count);
        for (std::size_t e = before; e < g.edges.size(); ++e) {
            Edge& ed = g.edges[e];
            const double rp = inflow_radius[static_cast<std::size_t>(ed.a)];
            ed.radius_um = std::clamp(rp * std::cbrt(0.25 + 0.5 * uniform01(rng)), cfg.min_radius_um, cfg.max_radius_um);
            inflow_radius.push_back(ed.radius_um);
        }
    }
    if (static_cast<int>(g.edges.size()) < cfg.vessel_count)
        throw GraphCapacityError(cfg.vessel_count, static_cast<int>(g.edges.size()));

    g.validate();
    return cfg.dilation == 1.0 ? g : g.dilated(cfg.dilation);
}

void write_graph(std::ostream& os, const VascularGraph& g) {
    os << "ulmgraph v1\n";
    os << std::setprecision(17);
    os << "dilation " << g.dilation << "\n";
    os << "bbox_min_um " << g.bbox_min.x << ' ' << g.bbox_min.y << ' ' << g.bbox_min.z << "\n";
    os << "bbox_max_um " << g.bbox_max.x << ' ' << g.bbox_max.y << ' ' << g.bbox_max.z << "\n";
    os << "nodes " << g.nodes.size() << "\n";
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        os << i << ' ' << g.nodes[i].x << ' ' << g.nodes[i].y << ' ' << g.nodes[i].z << "\n";
    os << "edges " << g.edges.size() << "\n";
    for (const Edge& e : g.edges) os << e.a << ' ' << e.b << ' ' << e.radius_um << "\n";
}

VascularGraph read_graph(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "ulmgraph v1") throw FormatError("missing 'ulmgraph v1' header");
    VascularGraph g;
    auto expect_key = [&](const std::string& key) {
        std::string k;
        if (!(is >> k) || k != key) throw FormatError("expected key '" + key + "'");
    };
    expect_key("dilation");
    is >> g.dilation;
    expect_key("bbox_min_um");
    is >> g.bbox_min.x >> g.bbox_min.y >> g.bbox_min.z;
    expect_key("bbox_max_um");
    is >> g.bbox_max.x >> g.bbox_max.y >> g.bbox_max.z;
    std::size_t n = 0;
    expect_key("nodes");
    is >> n;
    g.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t id = 0;
        is >> id >> g.nodes[i].x >> g.nodes[i].y >> g.nodes[i].z;
        if (id != i) throw FormatError("node ids must be contiguous");
    }
    expect_key("edges");
    is >> n;
    g.edges.resize(n);
    for (auto& e : g.edges) is >> e.a >> e.b >> e.radius_um;
    if (!is) throw FormatError("truncated graph file");
    g.validate();
    return g;
}

void save_graph(const std::string& path, const VascularGraph& g) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    write_graph(os, g);
}

VascularGraph load_graph(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    return read_graph(is);
}

double VelocityLaw::exponent() const { return std::log(v_hi / v_lo) / std::log(r_hi / r_lo); }
double VelocityLaw::prefactor() const { return v_lo / std::pow(r_lo, exponent()); }
double VelocityLaw::operator()(double radius_um) const {
    if (!(radius_um > 0)) throw ContractError("radius must be positive");
    return prefactor() * std::pow(radius_um, exponent());
}

double mean_velocity(double radius_um) { return VelocityLaw{}(radius_um); }

double poiseuille_velocity(double rho_um, double radius_um, double v_mean) {
    if (!(rho_um >= 0 && rho_um < radius_um))
        throw ContractError("radial offset must satisfy 0 <= rho < R (rho=" + std::to_string(rho_um) +
                            ", R=" + std::to_string(radius_um) + ")");
    const double q = rho_um / radius_um;
    return v_mean * (1.0 - q * q);
}

FlowField FlowField::from_graph(const VascularGraph& g, const VelocityLaw& law) {
    FlowField f;
    f.v_mean_mm_s.reserve(g.edges.size());
    for (const Edge& e : g.edges) f.v_mean_mm_s.push_back(law(e.radius_um / g.dilation));
    f.direction.assign(g.edges.size(), 1);
    return f;
}

Vec3 position(const VascularGraph& g, const Microbubble& mb) {
    const Edge& e = g.edges[static_cast<std::size_t>(mb.edge)];
    const Vec3 u = g.edge_direction(mb.edge);
    // Orthonormal frame around the axis.
    const Vec3 ref = std::abs(u.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    const Vec3 e1 = normalized(cross(u, ref));
    const Vec3 e2 = cross(u, e1);
    const double rho = mb.radial_fraction * e.radius_um;
    return g.nodes[static_cast<std::size_t>(e.a)] + u * mb.s_um +
           (e1 * std::cos(mb.angle) + e2 * std::sin(mb.angle)) * rho;
}

MicrobubbleSampler::MicrobubbleSampler(const VascularGraph& g) : graph_(&g) {
    double acc = 0;
    cumulative_length_.reserve(g.edges.size());
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        acc += g.edge_length(static_cast<int>(e));
        cumulative_length_.push_back(acc);
    }
}

Microbubble MicrobubbleSampler::sample(Rng& rng) const {
    Microbubble mb;
    const double total = cumulative_length_.back();
    const double u = uniform01(rng) * total;
    const auto it = std::upper_bound(cumulative_length_.begin(), cumulative_length_.end(), u);
    mb.edge = static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative_length_.begin(),
                                                        static_cast<std::ptrdiff_t>(cumulative_length_.size()) - 1));
    mb.s_um = uniform01(rng) * graph_->edge_length(mb.edge);
    mb.radial_fraction = std::sqrt(uniform01(rng));  // uniform over the disk, always < 1
    mb.angle = 2 * std::numbers::pi * uniform01(rng);
    return mb;
}

std::vector<Microbubble> seed_microbubbles(const VascularGraph& g, double density_per_mm3, Rng& rng) {
    if (!(density_per_mm3 >= 0)) throw ContractError("density must be nonnegative");
    const double mean = density_per_mm3 * g.volume_mm3();
    if (mean == 0 || g.edges.empty()) return {};
    const int count = std::poisson_distribution<int>(mean)(rng);
    MicrobubbleSampler sampler(g);
    std::vector<Microbubble> mbs;
    mbs.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) mbs.push_back(sampler.sample(rng));
    return mbs;
}

StepResult step_microbubbles(const VascularGraph& g, const FlowField& flow, std::vector<Microbubble>& mbs,
                             double dt_s, Rng& rng) {
    if (!(dt_s > 0)) throw ContractError("time step must be positive");
    const auto out = g.outgoing();
    MicrobubbleSampler sampler(g);
    StepResult res;
    res.positions.reserve(mbs.size());
    res.respawned.assign(mbs.size(), false);
    for (std::size_t i = 0; i < mbs.size(); ++i) {
        Microbubble& mb = mbs[i];
        const double q = mb.radial_fraction;
        const double v = flow.v_mean_mm_s[static_cast<std::size_t>(mb.edge)] * (1.0 - q * q);
        mb.s_um += v * dt_s * 1000.0;
        double len = g.edge_length(mb.edge);
        while (mb.s_um > len) {
            const double residual = mb.s_um - len;
            const auto& next = out[static_cast<std::size_t>(g.edges[static_cast<std::size_t>(mb.edge)].b)];
            if (next.empty()) {
                mb = sampler.sample(rng);
                res.respawned[i] = true;
                break;
            }
            int chosen = next.front();
            if (next.size() > 1) {
                double total = 0;
                for (int e : next) total += std::pow(g.edges[static_cast<std::size_t>(e)].radius_um, 4);
                double u = uniform01(rng) * total;
                for (int e : next) {
                    chosen = e;
                    u -= std::pow(g.edges[static_cast<std::size_t>(e)].radius_um, 4);
                    if (u < 0) break;
                }
            }
            mb.edge = chosen;
            mb.s_um = residual;
            len = g.edge_length(mb.edge);
        }
        res.positions.push_back(position(g, mb));
    }
    return res;
}

BlockMotion simulate_block_motion(const VascularGraph& g, const FlowField& flow, double density_per_mm3,
                                  int n_frames, double dt_s, Rng& rng) {
    BlockMotion motion;
    if (n_frames <= 0) return motion;
    std::vector<Microbubble> mbs = seed_microbubbles(g, density_per_mm3, rng);
    std::vector<std::size_t> track_of(mbs.size());
    std::vector<Vec3> pos0;
    for (std::size_t i = 0; i < mbs.size(); ++i) {
        pos0.push_back(position(g, mbs[i]));
        track_of[i] = motion.trajectories.size();
        motion.trajectories.push_back({{0, pos0.back()}});
    }
    motion.frames.push_back(std::move(pos0));
    for (int f = 1; f < n_frames; ++f) {
        StepResult step = step_microbubbles(g, flow, mbs, dt_s, rng);
        for (std::size_t i = 0; i < mbs.size(); ++i) {
            if (step.respawned[i]) {
                track_of[i] = motion.trajectories.size();
                motion.trajectories.emplace_back();
            }
            motion.trajectories[track_of[i]].push_back({f, step.positions[i]});
        }
        motion.frames.push_back(std::move(step.positions));
    }
    return motion;
}

BinaryImage rasterize_tracks(const std::vector<Trajectory>& trajectories, const BlockGeometry& geom,
                             const Placement& placement, int r) {
    if (r < 1 || (r & (r - 1)) != 0) throw ContractError("upscale factor must be a power of two");
    const int rows = geom.nz * r;
    const int cols = geom.nx * r;
    const double fine = geom.pitch_um / r;
    BinaryImage mask(rows, cols, 0);
    auto mark = [&](double u, double v) {
        const double fu = std::floor(u);
        const double fv = std::floor(v);
        if (fu < 0 || fv < 0 || fu >= rows || fv >= cols) return;
        mask(static_cast<int>(fu), static_cast<int>(fv)) = 1;
    };
    for (const Trajectory& tr : trajectories) {
        if (tr.empty()) continue;
        auto to_grid = [&](const Vec3& p) {
            return std::pair{(placement.depth(p) - geom.corner_z_um) / fine,
                             (placement.lateral(p) - geom.corner_x_um) / fine};
        };
        auto [u0, v0] = to_grid(tr.front().pos);
        mark(u0, v0);
        for (std::size_t k = 1; k < tr.size(); ++k) {
            auto [u1, v1] = to_grid(tr[k].pos);
            const double span = std::max(std::abs(u1 - u0), std::abs(v1 - v0));
            const int n = static_cast<int>(std::ceil(span * 4.0)) + 1;
            for (int s = 1; s <= n; ++s) {
                const double t = static_cast<double>(s) / n;
                mark(u0 + (u1 - u0) * t, v0 + (v1 - v0) * t);
            }
            u0 = u1;
            v0 = v1;
        }
    }
    return mask;
}

}  // namespace ulm
