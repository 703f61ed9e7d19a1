#pragma once

// Small fixtures shared by the unit tests.

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "ulm/dataset.hpp"
#include "ulm/vasculature.hpp"

namespace ulm::test {

inline SimulationConfig small_sim(int nt = 8, int n = 8, int r = 4) {
    SimulationConfig c;
    c.nt = nt;
    c.nz = n;
    c.nx = n;
    c.r = r;
    return c;
}

inline VascularGraph small_graph(std::uint64_t seed = 3) {
    GraphConfig g;
    g.seed = seed;
    return generate_synthetic_graph(g).dilated(g.dilation);
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("ulm_unit_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace ulm::test
