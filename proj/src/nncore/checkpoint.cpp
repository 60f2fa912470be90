#include "sembprobe/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>

#include "sembprobe/digest.hpp"
#include "sembprobe/error.hpp"

namespace sembprobe {

static_assert(std::numeric_limits<double>::is_iec559, "checkpoint format needs IEEE-754 doubles");

namespace {

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::string_view take(std::size_t n) {
        if (n > bytes_.size() - pos_) {
            throw ParseError("checkpoint truncated at byte " + std::to_string(pos_));
        }
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::uint64_t u64() {
        auto s = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) {
            v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
        }
        return v;
    }

    bool done() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

void Checkpoint::put(std::string name, Tensor tensor) {
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const auto& e) { return e.first == name; });
    if (it != entries_.end()) {
        it->second = std::move(tensor);
        return;
    }
    entries_.emplace_back(std::move(name), std::move(tensor));
}

bool Checkpoint::contains(std::string_view name) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto& e) { return e.first == name; });
}

const Tensor& Checkpoint::get(std::string_view name) const {
    for (const auto& [n, t] : entries_) {
        if (n == name) {
            return t;
        }
    }
    throw Error("checkpoint has no tensor named '" + std::string(name) + "'");
}

void Checkpoint::put_scalar(std::string name, double v) { put(std::move(name), Tensor({1}, {v})); }

double Checkpoint::get_scalar(std::string_view name) const { return get(name)[0]; }

std::string Checkpoint::serialize() const {
    std::string out(kMagic);
    out.push_back(static_cast<char>(kVersion));
    put_u64(out, entries_.size());
    for (const auto& [name, t] : entries_) {
        put_u64(out, name.size());
        out += name;
        put_u64(out, t.rank());
        for (std::size_t d : t.shape()) {
            put_u64(out, d);
        }
        for (double v : t.data()) {
            put_u64(out, std::bit_cast<std::uint64_t>(v));
        }
    }
    return out;
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
    Reader r(bytes);
    if (r.remaining() < kMagic.size() + 1 || r.take(kMagic.size()) != kMagic) {
        throw ParseError("not a checkpoint: bad magic");
    }
    const auto version = static_cast<std::uint8_t>(r.take(1)[0]);
    if (version != kVersion) {
        throw ParseError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    const std::uint64_t count = r.u64();
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name(r.take(r.u64()));
        const std::uint64_t rank = r.u64();
        if (rank > 16) {
            throw ParseError("tensor '" + name + "' has implausible rank " + std::to_string(rank));
        }
        std::vector<std::size_t> shape(rank);
        std::uint64_t n = 1;
        for (auto& d : shape) {
            d = r.u64();
            n *= d;
        }
        if (n > r.remaining() / 8) {
            throw ParseError("tensor '" + name + "' exceeds remaining checkpoint bytes");
        }
        std::vector<double> data(n);
        for (auto& v : data) {
            v = std::bit_cast<double>(r.u64());
        }
        ck.entries_.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    if (!r.done()) {
        throw ParseError("trailing bytes after checkpoint tensors");
    }
    return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    return deserialize(read_file(path));
}

std::string Checkpoint::digest() const { return sha256_hex(serialize()); }

} // namespace sembprobe
