#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sembprobe/tensor.hpp"

namespace sembprobe {

/// Ordered container of named tensors, persisted as:
///
///   "SEMBPROBE1" | version:u8 | count:u64
///   per tensor: name_len:u64 | name bytes | rank:u64 | dims:u64[rank] | data:f64[prod(dims)]
///
/// All integers and floats little-endian.
class Checkpoint {
public:
    static constexpr std::string_view kMagic = "SEMBPROBE1";
    static constexpr std::uint8_t kVersion = 1;

    void put(std::string name, Tensor tensor);
    bool contains(std::string_view name) const;
    const Tensor& get(std::string_view name) const;
    const std::vector<std::pair<std::string, Tensor>>& entries() const noexcept { return entries_; }

    /// Scalar convenience: stored as a rank-1 tensor of length 1.
    void put_scalar(std::string name, double v);
    double get_scalar(std::string_view name) const;

    std::string serialize() const;
    static Checkpoint deserialize(std::string_view bytes);

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

    /// SHA-256 of the serialized bytes.
    std::string digest() const;

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

} // namespace sembprobe
