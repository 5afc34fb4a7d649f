#pragma once

// Encoded-file container: a file header followed by packets of one or more
// blocks. A file of L bytes is cut into B blocks of k symbols of s bytes,
// zero-padded at the end. B > 1 only when one block would need symbols
// larger than a packet payload can carry.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "fountain/codec.hpp"
#include "fountain/errors.hpp"
#include "fountain/wire.hpp"

namespace fountain {

struct FileLayout {
    std::uint64_t length = 0;
    std::size_t k = 0;
    std::size_t symbol_bytes = 0;
    std::size_t blocks = 0;

    [[nodiscard]] std::size_t block_bytes() const noexcept { return k * symbol_bytes; }
};

inline std::size_t ceil_div(std::uint64_t a, std::uint64_t b) { return static_cast<std::size_t>((a + b - 1) / b); }

inline FileLayout plan_layout(std::uint64_t length, std::size_t k) {
    if (k < 2) throw UsageError("k must be >= 2");
    constexpr std::size_t max_symbol = std::numeric_limits<std::uint16_t>::max();
    FileLayout l;
    l.length = length;
    l.k = k;
    const std::size_t first = std::max<std::size_t>(1, ceil_div(length, static_cast<std::uint64_t>(k) * max_symbol));
    l.symbol_bytes = std::max<std::size_t>(1, ceil_div(length, static_cast<std::uint64_t>(k) * first));
    l.blocks = std::max<std::size_t>(1, ceil_div(length, l.block_bytes()));
    return l;
}

inline FileLayout layout_from_header(const wire::FileHeader& h) {
    FileLayout l;
    l.length = h.original_length;
    l.k = h.k;
    l.symbol_bytes = h.symbol_bits / 8;
    l.blocks = std::max<std::size_t>(1, ceil_div(h.original_length, l.block_bytes()));
    return l;
}

// Source symbols of block b, zero-padded.
inline std::vector<BitVector> block_symbols(std::span<const std::uint8_t> data, const FileLayout& l, std::size_t b) {
    std::vector<BitVector> out;
    out.reserve(l.k);
    std::vector<std::uint8_t> buf(l.symbol_bytes);
    for (std::size_t j = 0; j < l.k; ++j) {
        const std::uint64_t start = static_cast<std::uint64_t>(b) * l.block_bytes() + j * l.symbol_bytes;
        std::fill(buf.begin(), buf.end(), 0);
        if (start < data.size()) {
            const auto n = std::min<std::uint64_t>(l.symbol_bytes, data.size() - start);
            std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(start), n, buf.begin());
        }
        out.push_back(BitVector::from_bytes(buf));
    }
    return out;
}

// Concatenates decoded blocks and trims the padding.
inline std::vector<std::uint8_t> join_blocks(const std::vector<std::vector<BitVector>>& blocks, const FileLayout& l) {
    std::vector<std::uint8_t> out;
    out.reserve(l.blocks * l.block_bytes());
    for (const auto& blk : blocks)
        for (const auto& s : blk) {
            auto b = s.to_bytes();
            out.insert(out.end(), b.begin(), b.end());
        }
    out.resize(l.length);
    return out;
}

struct EncodeFileOptions {
    std::size_t k = 0;
    std::size_t symbols = 0;  // packets per block
    std::size_t p = 0;
    DistributionKind distribution = DistributionKind::IdealSoliton;
    std::uint64_t seed = 0;
};

// Header plus `symbols` explicit-index packets per block. Block b uses the
// session seed derive_seed(seed, b).
inline std::vector<std::uint8_t> encode_file(std::span<const std::uint8_t> data, const EncodeFileOptions& o) {
    if (o.symbols == 0) throw UsageError("--symbols must be >= 1");
    if (o.p > std::numeric_limits<std::uint16_t>::max()) throw UsageError("p too large");
    if (o.k > std::numeric_limits<std::uint32_t>::max()) throw UsageError("k too large");
    const auto l = plan_layout(data.size(), o.k);
    CodeParams params{.k = o.k, .symbol_bits = l.symbol_bytes * 8, .p = o.p, .distribution = o.distribution};
    params.validate();
    if (o.distribution == DistributionKind::RaptorLT && o.k < 64) throw UsageError("r10 needs k >= 64");

    std::vector<std::uint8_t> out;
    wire::write_file_header(out, {l.length, static_cast<std::uint32_t>(l.k), static_cast<std::uint32_t>(params.symbol_bits)});
    for (std::size_t b = 0; b < l.blocks; ++b) {
        const auto src = block_symbols(data, l, b);
        Encoder enc(src, params, derive_seed(o.seed, b));
        for (std::size_t c = 0; c < o.symbols; ++c) {
            auto pk = wire::to_packet(enc.symbol(c), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(o.k),
                                      static_cast<std::uint16_t>(o.p));
            wire::write_packet(out, pk);
        }
    }
    return out;
}

struct Container {
    wire::FileHeader header;
    FileLayout layout;
    std::size_t p = 0;
    std::map<std::uint32_t, std::vector<wire::Packet>> blocks;
};

// Parses a container and checks that every packet agrees with the header.
inline Container read_container(std::span<const std::uint8_t> bytes) {
    wire::Reader r(bytes);
    Container c;
    c.header = wire::read_file_header(r);
    c.layout = layout_from_header(c.header);
    bool have_p = false;
    while (r.remaining() > 0) {
        auto pk = wire::read_packet(r);
        if (pk.k != c.header.k) throw ProtocolError("packet k does not match the file header");
        if (pk.block_id >= c.layout.blocks) throw ProtocolError("packet block id out of range");
        if (pk.payload.size() != c.layout.symbol_bytes) throw ProtocolError("packet payload size does not match the file header");
        if (have_p && pk.p != c.p) throw ProtocolError("packets disagree on p");
        c.p = pk.p;
        have_p = true;
        c.blocks[pk.block_id].push_back(std::move(pk));
    }
    return c;
}

} // namespace fountain
