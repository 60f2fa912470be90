#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sembprobe {

/// Binary Huffman code over vocabulary frequencies. Internal nodes are
/// numbered 0..V-2 in creation order, so the root is V-2. Paths and codes
/// run root first; bit 0 marks the first-merged (lighter) child.
struct HuffmanTree {
    std::vector<std::vector<std::uint32_t>> paths;
    std::vector<std::vector<std::uint8_t>> codes;

    std::size_t leaves() const noexcept { return codes.size(); }
    std::size_t internal_nodes() const noexcept { return leaves() == 0 ? 0 : leaves() - 1; }
};

/// Deterministic: equal weights are merged smaller node id first
/// (leaves are ids 0..V-1, internal nodes continue from V).
HuffmanTree build_huffman(std::span<const std::uint64_t> counts);

} // namespace sembprobe
