// Sequential doping against an in-process repair server, with the decoding
// matrix printed for a tiny block before and after the first stall.

#include <iostream>

#include "fountain/sim.hpp"

using namespace fountain;

int main() {
    const CodeParams params{.k = 12, .symbol_bits = 8};
    Rng rng(3);
    const auto block = sim::random_block(params.k, params.symbol_bits, rng);
    const auto symbols = encode(block, params, 12, 5);

    sim::RepairOracle server(block, /*feedback_delay=*/1000.0);
    PeelingDecoder dec(symbols, params, {.policy = StallPolicy::Sequential, .seed = 2});
    std::cout << "initial matrix (rows x, equations as columns):\n" << dec.render();

    while (dec.peel()) {
    }
    std::cout << "\nstalled after " << dec.processed() << " symbols:\n" << dec.render();
    if (auto q = dec.dope_degree_two()) {
        std::cout << "doping x" << *q << "\n";
        dec.apply_doping(*q, server.fetch(*q));
    }

    DecodeOptions opts{.policy = StallPolicy::Sequential, .repair = [&](std::uint32_t q) { return server.fetch(q); }, .seed = 2};
    auto out = decode(symbols, params, opts);
    auto ge = finalize_ge(out);
    std::map<std::uint32_t, BitVector> doped;
    for (auto j : out.sequential_doped) doped.emplace(j, block[j]);
    for (auto j : ge.minimal_dopings) doped.emplace(j, server.fetch(j));
    const bool ok = back_substitute(out, doped) == block;
    std::cout << "\nfull run: " << out.sequential_doped.size() << " sequential dopings, " << ge.d_min
              << " after GE, repair cost " << server.total_bits() << " bits, " << (ok ? "recovered" : "MISMATCH") << "\n";
    return ok ? 0 : 1;
}
