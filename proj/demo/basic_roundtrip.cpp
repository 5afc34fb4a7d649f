// Encode a random block, lose some packets, decode with postponed
// inactivation, fetch the must-dope symbols and check the result.

#include <iostream>

#include "fountain/sim.hpp"

using namespace fountain;

int main() {
    const CodeParams params{.k = 1000, .symbol_bits = 256, .p = default_permanent_inactivations(1000)};
    Rng rng(7);
    const auto block = sim::random_block(params.k, params.symbol_bits, rng);

    // 1150 packets over a 5% erasure channel: about 1092 arrive
    const auto sent = encode(block, params, 1150, /*session_seed=*/42);
    const auto received = sim::erasure_channel(sent, 0.05, rng);

    auto out = decode(received, params, {.policy = StallPolicy::Postponed, .seed = 1});
    const auto ge = finalize_ge(out);
    std::cout << "received " << received.size() << " packets\n"
              << "inactivated " << out.i() << ", uncovered " << out.u() << ", permanent " << out.permanent() << "\n"
              << "rank " << ge.rank.rank << " of " << ge.rank.variables << ", must dope " << ge.d_min << "\n";

    std::map<std::uint32_t, BitVector> doped;
    for (auto j : ge.minimal_dopings) doped.emplace(j, block[j]);
    const auto decoded = back_substitute(out, doped);
    const bool ok = decoded == block;
    std::cout << (ok ? "block recovered\n" : "MISMATCH\n");
    return ok ? 0 : 1;
}
