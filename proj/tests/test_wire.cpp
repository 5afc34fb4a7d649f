#include <gtest/gtest.h>

#include "fountain/wire.hpp"

using namespace fountain;
using namespace fountain::wire;

namespace {

Packet sample_packet() {
    Packet pk;
    pk.block_id = 7;
    pk.k = 1000;
    pk.p = 32;
    pk.column_id = 123456;
    pk.kind = HeaderKind::Explicit;
    pk.indices = {3, 17, 999};
    pk.payload = {0xde, 0xad, 0xbe, 0xef};
    return pk;
}

void expect_same(const Packet& a, const Packet& b) {
    EXPECT_EQ(a.block_id, b.block_id);
    EXPECT_EQ(a.k, b.k);
    EXPECT_EQ(a.p, b.p);
    EXPECT_EQ(a.column_id, b.column_id);
    EXPECT_EQ(a.kind, b.kind);
    EXPECT_EQ(a.seed, b.seed);
    EXPECT_EQ(a.indices, b.indices);
    EXPECT_EQ(a.payload, b.payload);
}

} // namespace

TEST(Packet, ExactBytes) {
    Packet pk;
    pk.block_id = 1;
    pk.k = 0x0100;
    pk.p = 2;
    pk.column_id = 0x0a0b0c0d;
    pk.indices = {5};
    pk.payload = {0xaa};
    const std::vector<std::uint8_t> expect{0xD0, 0xFE, 0x01,                   // magic, version
                                           0x00, 0x00, 0x00, 0x01,             // block
                                           0x00, 0x00, 0x01, 0x00,             // k
                                           0x00, 0x02,                         // p
                                           0x0a, 0x0b, 0x0c, 0x0d,             // column
                                           0x01, 0x00, 0x01, 0x00, 0x00, 0x00, 0x05,  // explicit, degree, index
                                           0x00, 0x01, 0xaa};
    EXPECT_EQ(serialize(pk), expect);
}

TEST(Packet, RoundTripBothKinds) {
    const auto a = sample_packet();
    expect_same(parse_packet(serialize(a)), a);
    auto b = a;
    b.kind = HeaderKind::Seed;
    b.indices.clear();
    b.seed = 0x0123456789abcdefULL;
    const auto bytes = serialize(b);
    EXPECT_EQ(bytes.size(), 2 + 1 + 4 + 4 + 2 + 4 + 1 + 8 + 2 + 4u);
    expect_same(parse_packet(bytes), b);
}

TEST(Packet, RejectsMalformed) {
    const auto good = serialize(sample_packet());
    for (std::size_t cut = 0; cut < good.size(); ++cut)
        EXPECT_THROW(parse_packet(std::span(good).first(cut)), ProtocolError) << cut;
    auto bad = good;
    bad[0] = 0x00;
    EXPECT_THROW(parse_packet(bad), ProtocolError);
    bad = good;
    bad[2] = 2;
    EXPECT_THROW(parse_packet(bad), ProtocolError);
    bad = good;
    bad[17] = 9;  // header kind
    EXPECT_THROW(parse_packet(bad), ProtocolError);
    auto out_of_range = sample_packet();
    out_of_range.indices = {1000};
    EXPECT_THROW(parse_packet(serialize(out_of_range)), ProtocolError);
    auto trailing = good;
    trailing.push_back(0);
    EXPECT_THROW(parse_packet(trailing), ProtocolError);
    auto big_p = sample_packet();
    big_p.p = 1000;
    EXPECT_THROW(parse_packet(serialize(big_p)), ProtocolError);
}

TEST(Packet, SeedHeaderReproducesEncoderColumns) {
    for (auto dist : {DistributionKind::IdealSoliton, DistributionKind::RaptorLT}) {
        const std::size_t k = 200, p = 11;
        std::vector<BitVector> block(k, BitVector(16));
        for (std::size_t j = 0; j < k; ++j) block[j] = BitVector::from_bytes(std::vector<std::uint8_t>{std::uint8_t(j), std::uint8_t(j >> 8)});
        CodeParams params{.k = k, .symbol_bits = 16, .p = p, .distribution = dist};
        Encoder enc(block, params, 4242);
        for (std::uint64_t c = 0; c < 300; ++c) {
            const auto sym = enc.symbol(c);
            const auto pk = parse_packet(serialize(to_packet(sym, 0, k, p, HeaderKind::Seed, 4242)));
            const auto back = from_packet(pk, dist);
            EXPECT_EQ(back.indices, sym.indices);
            EXPECT_EQ(back.payload, sym.payload);
            EXPECT_EQ(back.column_id, c);
        }
    }
}

TEST(Packet, RejectsUnalignedPayload) {
    EncodedSymbol sym;
    sym.payload = BitVector(12);
    EXPECT_THROW(to_packet(sym, 0, 10, 0), UsageError);
}

TEST(Doping, RequestAndResponseRoundTrip) {
    const DopingRequest req{9, {1, 2, 70000}};
    const auto rb = serialize(req);
    EXPECT_EQ(rb.size(), 2 + 4 + 2 + 12u);
    const auto req2 = parse_request(rb);
    EXPECT_EQ(req2.block_id, 9u);
    EXPECT_EQ(req2.indices, req.indices);

    const DopingResponse resp{9, {{1, 2, 3}, {4, 5, 6}}};
    const auto pb = serialize(resp);
    const auto resp2 = parse_response(pb, 3);
    EXPECT_EQ(resp2.block_id, 9u);
    EXPECT_EQ(resp2.payloads, resp.payloads);
    EXPECT_THROW(parse_response(pb, 4), ProtocolError);
    EXPECT_THROW(parse_response(pb, 2), ProtocolError);

    const DopingRequest empty{3, {}};
    EXPECT_TRUE(parse_request(serialize(empty)).indices.empty());
    auto bad = rb;
    bad[1] = 0xFE;
    EXPECT_THROW(parse_request(bad), ProtocolError);
}

TEST(FileHeader, RoundTripAndValidation) {
    std::vector<std::uint8_t> out;
    write_file_header(out, {123456789012ULL, 1000, 64});
    ASSERT_EQ(out.size(), FileHeader::size);
    Reader r(out);
    const auto h = read_file_header(r);
    EXPECT_EQ(h.original_length, 123456789012ULL);
    EXPECT_EQ(h.k, 1000u);
    EXPECT_EQ(h.symbol_bits, 64u);

    for (FileHeader bad : {FileHeader{1, 1, 8}, FileHeader{1, 10, 0}, FileHeader{1, 10, 12}}) {
        std::vector<std::uint8_t> b;
        write_file_header(b, bad);
        Reader rb(b);
        EXPECT_THROW(read_file_header(rb), ProtocolError);
    }
}
