// Compare VSM, LSI and IRR on synthetic two-topic collections that grow more skewed.
//
// Usage: irr_vs_lsi [seed]

#include <cstdio>
#include <cstdlib>

#include "irr/corpus.hpp"
#include "irr/evalmetrics.hpp"
#include "irr/subspace.hpp"

namespace s = irr::subspace;

int main(int argc, char** argv) {
    const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
    std::printf("%-8s %8s %8s %8s %8s\n", "dist", "vsm", "lsi", "irr", "q");
    for (std::size_t major : {25, 35, 40, 43, 46}) {
        irr::corpus::SynthSpec spec;
        spec.distribution = {major, 50 - major};
        spec.rng_seed = seed;
        const auto col = irr::corpus::synthesize_collection(spec);
        const auto tdm = irr::corpus::build_matrix(col.docs, {});
        const auto& a = tdm.matrix;

        s::IrrConfig cfg;
        cfg.q = s::AutoScale{};
        cfg.ell = std::size_t{2};
        const auto irr_basis = s::irr(a, cfg);

        const double k_vsm = irr::eval::kappa(a, col.topics, &tdm.doc_ids);
        const double k_lsi = irr::eval::kappa(s::represent(a, s::lsi(a, 2)), col.topics, &tdm.doc_ids);
        const double k_irr = irr::eval::kappa(s::represent(a, irr_basis), col.topics, &tdm.doc_ids);
        std::printf("%2zu-%-5zu %8.3f %8.3f %8.3f %8.3f\n", major, 50 - major, k_vsm, k_lsi, k_irr, irr_basis.q);
    }
}
