#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace emk {

// Grid of d-dimensional convolutional descriptors for one patch. Stored as
// the n^2 x d matrix Phi, position-major with the same flat index as
// PositionTable rows.
struct FeatureTensor {
    int n = 0;
    int d = 0;
    std::vector<double> data; // n^2 * d

    double* at(int flat_pos) { return data.data() + static_cast<std::size_t>(flat_pos) * d; }
    const double* at(int flat_pos) const { return data.data() + static_cast<std::size_t>(flat_pos) * d; }
    int positions() const { return n * n; }
};

FeatureTensor make_feature_tensor(int n, int d);

// Tensor file: magic "EMKT", u32 n, u32 d, then n^2*d little-endian f32
// values, position-major then channel. Values round-trip bit-exactly when
// they originate from f32.
void write_tensor(std::ostream& out, const FeatureTensor& tensor);
FeatureTensor read_tensor(std::istream& in);
void write_tensor_file(const std::filesystem::path& path, const FeatureTensor& tensor);
FeatureTensor read_tensor_file(const std::filesystem::path& path);

// Descriptor file: magic "EMKD", u32 count, u32 D, then count*D
// little-endian f32 values.
void write_descriptor_file(const std::filesystem::path& path,
                           const std::vector<std::vector<double>>& descriptors);
std::vector<std::vector<double>> read_descriptor_file(const std::filesystem::path& path);

} // namespace emk
