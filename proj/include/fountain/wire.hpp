#pragma once

// Big-endian wire formats: encoded-symbol packets, doping request and
// response messages, and the header of an encoded file.
//
//   packet   : 0xD0FE | version u8 (=1) | block_id u32 | k u32 | p u16 |
//              column_id u32 | kind u8 | (kind 0: seed u64 |
//              kind 1: degree u16, degree x index u32) |
//              payload_len u16 | payload
//   request  : 0xD0FD | block_id u32 | count u16 | count x index u32
//   response : 0xD0FD | block_id u32 | count u16 | count x payload
//   file     : 0xD0FC | original_length u64 | k u32 | symbol_bits u32

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fountain/codec.hpp"
#include "fountain/degree.hpp"
#include "fountain/errors.hpp"

namespace fountain::wire {

inline constexpr std::uint16_t packet_magic = 0xD0FE;
inline constexpr std::uint16_t doping_magic = 0xD0FD;
inline constexpr std::uint16_t file_magic = 0xD0FC;
inline constexpr std::uint8_t packet_version = 1;

class Writer {
public:
    explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { be(v, 2); }
    void u32(std::uint32_t v) { be(v, 4); }
    void u64(std::uint64_t v) { be(v, 8); }
    void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

private:
    void be(std::uint64_t v, int n) {
        for (int i = n - 1; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t>& out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    [[nodiscard]] std::size_t remaining() const noexcept { return in_.size() - pos_; }
    [[nodiscard]] std::size_t position() const noexcept { return pos_; }

    std::uint8_t u8() { return static_cast<std::uint8_t>(be(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(be(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(be(4)); }
    std::uint64_t u64() { return be(8); }
    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw ProtocolError("truncated message");
    }
    std::uint64_t be(std::size_t n) {
        need(n);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) v = (v << 8) | in_[pos_ + i];
        pos_ += n;
        return v;
    }
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

enum class HeaderKind : std::uint8_t { Seed = 0, Explicit = 1 };

struct Packet {
    std::uint32_t block_id = 0;
    std::uint32_t k = 0;
    std::uint16_t p = 0;
    std::uint32_t column_id = 0;
    HeaderKind kind = HeaderKind::Explicit;
    std::uint64_t seed = 0;               // kind Seed: the column's stream seed
    std::vector<std::uint32_t> indices;   // kind Explicit
    std::vector<std::uint8_t> payload;
};

inline void write_packet(std::vector<std::uint8_t>& out, const Packet& pk) {
    if (pk.payload.size() > std::numeric_limits<std::uint16_t>::max()) throw UsageError("packet payload too large");
    Writer w(out);
    w.u16(packet_magic);
    w.u8(packet_version);
    w.u32(pk.block_id);
    w.u32(pk.k);
    w.u16(pk.p);
    w.u32(pk.column_id);
    w.u8(static_cast<std::uint8_t>(pk.kind));
    if (pk.kind == HeaderKind::Seed) {
        w.u64(pk.seed);
    } else {
        if (pk.indices.size() > std::numeric_limits<std::uint16_t>::max()) throw UsageError("packet degree too large");
        w.u16(static_cast<std::uint16_t>(pk.indices.size()));
        for (auto i : pk.indices) w.u32(i);
    }
    w.u16(static_cast<std::uint16_t>(pk.payload.size()));
    w.bytes(pk.payload);
}

inline Packet read_packet(Reader& r) {
    if (r.u16() != packet_magic) throw ProtocolError("bad packet magic");
    if (r.u8() != packet_version) throw ProtocolError("unsupported packet version");
    Packet pk;
    pk.block_id = r.u32();
    pk.k = r.u32();
    pk.p = r.u16();
    pk.column_id = r.u32();
    const auto kind = r.u8();
    if (kind == 0) {
        pk.kind = HeaderKind::Seed;
        pk.seed = r.u64();
    } else if (kind == 1) {
        pk.kind = HeaderKind::Explicit;
        const auto degree = r.u16();
        pk.indices.reserve(degree);
        for (std::uint16_t i = 0; i < degree; ++i) {
            const auto idx = r.u32();
            if (idx >= pk.k) throw ProtocolError("packet index out of range");
            pk.indices.push_back(idx);
        }
    } else {
        throw ProtocolError("unknown header kind");
    }
    if (pk.p >= pk.k) throw ProtocolError("packet p must be < k");
    const auto len = r.u16();
    auto b = r.bytes(len);
    pk.payload.assign(b.begin(), b.end());
    return pk;
}

inline std::vector<std::uint8_t> serialize(const Packet& pk) {
    std::vector<std::uint8_t> out;
    write_packet(out, pk);
    return out;
}

inline Packet parse_packet(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    auto pk = read_packet(r);
    if (r.remaining() != 0) throw ProtocolError("trailing bytes after packet");
    return pk;
}

// Packet for an encoded symbol. Payload bits must be a whole number of bytes.
inline Packet to_packet(const EncodedSymbol& sym, std::uint32_t block_id, std::uint32_t k, std::uint16_t p,
                        HeaderKind kind = HeaderKind::Explicit, std::uint64_t session_seed = 0) {
    if (sym.payload.size() % 8 != 0) throw UsageError("to_packet: symbol size must be a multiple of 8 bits");
    Packet pk;
    pk.block_id = block_id;
    pk.k = k;
    pk.p = p;
    pk.column_id = static_cast<std::uint32_t>(sym.column_id);
    pk.kind = kind;
    if (kind == HeaderKind::Seed) pk.seed = derive_seed(session_seed, sym.column_id);
    else pk.indices = sym.indices;
    pk.payload = sym.payload.to_bytes();
    return pk;
}

// Expands a packet back into an equation. Seed-kind packets need the
// degree distribution, which travels out of band.
inline EncodedSymbol from_packet(const Packet& pk, DistributionKind dist = DistributionKind::IdealSoliton) {
    EncodedSymbol sym;
    sym.column_id = pk.column_id;
    if (pk.kind == HeaderKind::Seed) {
        ColumnSampler sampler(make_distribution(dist, pk.k), pk.k, pk.p);
        Rng rng(pk.seed);
        sym.indices = sampler.sample(rng).all();
    } else {
        sym.indices = pk.indices;
    }
    sym.payload = BitVector::from_bytes(pk.payload);
    return sym;
}

struct DopingRequest {
    std::uint32_t block_id = 0;
    std::vector<std::uint32_t> indices;
};

struct DopingResponse {
    std::uint32_t block_id = 0;
    std::vector<std::vector<std::uint8_t>> payloads;
};

inline std::vector<std::uint8_t> serialize(const DopingRequest& req) {
    if (req.indices.size() > std::numeric_limits<std::uint16_t>::max()) throw UsageError("doping request too large");
    std::vector<std::uint8_t> out;
    Writer w(out);
    w.u16(doping_magic);
    w.u32(req.block_id);
    w.u16(static_cast<std::uint16_t>(req.indices.size()));
    for (auto i : req.indices) w.u32(i);
    return out;
}

inline DopingRequest parse_request(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    if (r.u16() != doping_magic) throw ProtocolError("bad doping magic");
    DopingRequest req;
    req.block_id = r.u32();
    const auto n = r.u16();
    for (std::uint16_t i = 0; i < n; ++i) req.indices.push_back(r.u32());
    if (r.remaining() != 0) throw ProtocolError("trailing bytes after doping request");
    return req;
}

inline std::vector<std::uint8_t> serialize(const DopingResponse& resp) {
    if (resp.payloads.size() > std::numeric_limits<std::uint16_t>::max()) throw UsageError("doping response too large");
    std::vector<std::uint8_t> out;
    Writer w(out);
    w.u16(doping_magic);
    w.u32(resp.block_id);
    w.u16(static_cast<std::uint16_t>(resp.payloads.size()));
    for (const auto& p : resp.payloads) w.bytes(p);
    return out;
}

// Payloads all have `payload_bytes` bytes, fixed by the session.
inline DopingResponse parse_response(std::span<const std::uint8_t> bytes, std::size_t payload_bytes) {
    Reader r(bytes);
    if (r.u16() != doping_magic) throw ProtocolError("bad doping magic");
    DopingResponse resp;
    resp.block_id = r.u32();
    const auto n = r.u16();
    for (std::uint16_t i = 0; i < n; ++i) {
        auto b = r.bytes(payload_bytes);
        resp.payloads.emplace_back(b.begin(), b.end());
    }
    if (r.remaining() != 0) throw ProtocolError("trailing bytes after doping response");
    return resp;
}

struct FileHeader {
    std::uint64_t original_length = 0;
    std::uint32_t k = 0;
    std::uint32_t symbol_bits = 0;

    static constexpr std::size_t size = 2 + 8 + 4 + 4;
};

inline void write_file_header(std::vector<std::uint8_t>& out, const FileHeader& h) {
    Writer w(out);
    w.u16(file_magic);
    w.u64(h.original_length);
    w.u32(h.k);
    w.u32(h.symbol_bits);
}

inline FileHeader read_file_header(Reader& r) {
    if (r.u16() != file_magic) throw ProtocolError("bad file magic");
    FileHeader h;
    h.original_length = r.u64();
    h.k = r.u32();
    h.symbol_bits = r.u32();
    if (h.k < 2) throw ProtocolError("file header: k must be >= 2");
    if (h.symbol_bits == 0 || h.symbol_bits % 8 != 0) throw ProtocolError("file header: bad symbol size");
    return h;
}

} // namespace fountain::wire
