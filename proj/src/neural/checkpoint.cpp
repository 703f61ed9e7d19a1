#include "ulm/neural/checkpoint.hpp"

#include <bit>
#include <fstream>

#include "detail/binary_io.hpp"

namespace ulm::nn {

using detail::get_le;
using detail::put_le;

namespace {

void put_i32(std::ostream& os, int v) { put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v)); }
int get_i32(std::istream& is) { return static_cast<int>(get_le<std::uint32_t>(is)); }

void put_list(std::ostream& os, const std::vector<int>& v) {
    put_i32(os, static_cast<int>(v.size()));
    for (int x : v) put_i32(os, x);
}

std::vector<int> get_list(std::istream& is) {
    const int n = get_i32(is);
    if (n < 0 || n > 64) throw FormatError("implausible list length in checkpoint");
    std::vector<int> v(static_cast<std::size_t>(n));
    for (int& x : v) x = get_i32(is);
    return v;
}

}  // namespace

void write_checkpoint(std::ostream& os, const Network<float>& net) {
    const ModelConfig& c = net.config();
    os.write("ULMW", 4);
    put_le<std::uint16_t>(os, kCheckpointVersion);
    for (int v : {c.in_channels, c.nt, c.nz, c.nx, c.r, c.kernel_3d, c.kernel_2d, c.temporal_pool, c.spatial_pool,
                  c.decoder_temporal_pool})
        put_i32(os, v);
    put_list(os, c.encoder_widths);
    put_list(os, c.decoder_widths);
    put_list(os, c.upsampler_widths);
    put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(c.threshold));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.params().size()));
    for (const auto& p : net.params()) {
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rank()));
        for (int d : p.value.shape) put_i32(os, d);
        for (float v : p.value.data) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
    }
    if (!os) throw std::runtime_error("checkpoint write failed");
}

Network<float> read_checkpoint(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "ULMW") throw FormatError("bad magic, expected ULMW");
    const auto version = get_le<std::uint16_t>(is);
    if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    ModelConfig c;
    for (int* f : {&c.in_channels, &c.nt, &c.nz, &c.nx, &c.r, &c.kernel_3d, &c.kernel_2d, &c.temporal_pool,
                   &c.spatial_pool, &c.decoder_temporal_pool})
        *f = get_i32(is);
    c.encoder_widths = get_list(is);
    c.decoder_widths = get_list(is);
    c.upsampler_widths = get_list(is);
    c.threshold = std::bit_cast<double>(get_le<std::uint64_t>(is));
    Network<float> net(c);
    const auto count = get_le<std::uint32_t>(is);
    if (count != net.params().size())
        throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                          std::to_string(net.params().size()));
    for (auto& p : net.params()) {
        const auto len = get_le<std::uint32_t>(is);
        std::string name(len, '\0');
        if (len > 256 || !is.read(name.data(), len)) throw FormatError("bad tensor name in checkpoint");
        if (name != p.name) throw FormatError("checkpoint tensor '" + name + "' where '" + p.name + "' was expected");
        const auto rank = get_le<std::uint32_t>(is);
        if (rank > 8) throw FormatError("implausible tensor rank in checkpoint");
        std::vector<int> shape(rank);
        for (int& d : shape) d = get_i32(is);
        if (shape != p.value.shape)
            throw FormatError(name + ": shape " + shape_string(shape) + " does not match " + shape_string(p.value.shape));
        for (float& v : p.value.data) v = std::bit_cast<float>(get_le<std::uint32_t>(is));
    }
    return net;
}

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_checkpoint(os, net);
}

Network<float> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    return read_checkpoint(is);
}

}  // namespace ulm::nn
