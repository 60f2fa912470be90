#include "sembprobe/huffman.hpp"

#include <algorithm>
#include <queue>
#include <utility>

#include "sembprobe/error.hpp"

namespace sembprobe {

HuffmanTree build_huffman(std::span<const std::uint64_t> counts) {
    const std::size_t v = counts.size();
    if (v < 2) {
        throw ConfigError("Huffman tree needs at least 2 leaves, got " + std::to_string(v));
    }
    using Item = std::pair<std::uint64_t, std::size_t>; // (weight, node id)
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (std::size_t i = 0; i < v; ++i) {
        heap.emplace(counts[i], i);
    }
    // Node ids: leaves 0..v-1, internal v..2v-2.
    std::vector<std::size_t> parent(2 * v - 1, 0);
    std::vector<std::uint8_t> bit(2 * v - 1, 0);
    std::size_t next = v;
    while (heap.size() > 1) {
        auto [wa, a] = heap.top();
        heap.pop();
        auto [wb, b] = heap.top();
        heap.pop();
        parent[a] = next;
        parent[b] = next;
        bit[a] = 0;
        bit[b] = 1;
        heap.emplace(wa + wb, next);
        ++next;
    }
    const std::size_t root = 2 * v - 2;

    HuffmanTree tree;
    tree.paths.resize(v);
    tree.codes.resize(v);
    for (std::size_t leaf = 0; leaf < v; ++leaf) {
        auto& path = tree.paths[leaf];
        auto& code = tree.codes[leaf];
        for (std::size_t n = leaf; n != root; n = parent[n]) {
            code.push_back(bit[n]);
            path.push_back(static_cast<std::uint32_t>(parent[n] - v));
        }
        std::reverse(path.begin(), path.end());
        std::reverse(code.begin(), code.end());
    }
    return tree;
}

} // namespace sembprobe
