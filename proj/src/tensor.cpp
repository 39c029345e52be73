#include "emk/tensor.hpp"

#include "emk/binary_io.hpp"
#include "emk/error.hpp"

#include <fstream>
#include <limits>
#include <stdexcept>

namespace emk {

namespace {

constexpr char kTensorMagic[4] = {'E', 'M', 'K', 'T'};
constexpr char kDescriptorMagic[4] = {'E', 'M', 'K', 'D'};

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw format_error("cannot open file: " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw format_error("cannot create file: " + path.string());
    return out;
}

} // namespace

FeatureTensor make_feature_tensor(int n, int d) {
    if (n < 1 || d < 1)
        throw std::invalid_argument("make_feature_tensor: n and d must be >= 1");
    FeatureTensor t;
    t.n = n;
    t.d = d;
    t.data.assign(static_cast<std::size_t>(n) * n * d, 0.0);
    return t;
}

void write_tensor(std::ostream& out, const FeatureTensor& tensor) {
    io::put_magic(out, kTensorMagic);
    io::put_u32(out, static_cast<std::uint32_t>(tensor.n));
    io::put_u32(out, static_cast<std::uint32_t>(tensor.d));
    io::put_f32_array(out, tensor.data);
    if (!out)
        throw format_error("failed to write tensor stream");
}

FeatureTensor read_tensor(std::istream& in) {
    io::expect_magic(in, kTensorMagic, "tensor file");
    const std::uint32_t n = io::get_u32(in);
    const std::uint32_t d = io::get_u32(in);
    if (n < 1 || d < 1 || n > 4096 || d > (1u << 20))
        throw format_error("tensor file header has implausible shape");
    FeatureTensor tensor;
    tensor.n = static_cast<int>(n);
    tensor.d = static_cast<int>(d);
    tensor.data = io::get_f32_array(in, static_cast<std::size_t>(n) * n * d);
    return tensor;
}

void write_tensor_file(const std::filesystem::path& path, const FeatureTensor& tensor) {
    auto out = open_output(path);
    write_tensor(out, tensor);
}

FeatureTensor read_tensor_file(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_tensor(in);
}

void write_descriptor_file(const std::filesystem::path& path,
                           const std::vector<std::vector<double>>& descriptors) {
    auto out = open_output(path);
    io::put_magic(out, kDescriptorMagic);
    io::put_u32(out, static_cast<std::uint32_t>(descriptors.size()));
    const std::size_t dim = descriptors.empty() ? 0 : descriptors.front().size();
    io::put_u32(out, static_cast<std::uint32_t>(dim));
    for (const auto& desc : descriptors) {
        if (desc.size() != dim)
            throw std::invalid_argument("write_descriptor_file: inconsistent dimensions");
        io::put_f32_array(out, desc);
    }
    if (!out)
        throw format_error("failed to write descriptor file: " + path.string());
}

std::vector<std::vector<double>> read_descriptor_file(const std::filesystem::path& path) {
    auto in = open_input(path);
    io::expect_magic(in, kDescriptorMagic, "descriptor file");
    const std::uint32_t count = io::get_u32(in);
    const std::uint32_t dim = io::get_u32(in);
    if (count > (1u << 24) || dim > (1u << 20))
        throw format_error("descriptor file header has implausible shape");
    std::vector<std::vector<double>> descriptors(count);
    for (auto& desc : descriptors)
        desc = io::get_f32_array(in, dim);
    return descriptors;
}

} // namespace emk
