#pragma once

#include <cstddef>
#include <vector>

#include "wad/dataset.hpp"
#include "wad/pseudo_labeling.hpp"
#include "wad/weighting.hpp"

namespace wad {

/// What the teacher says about one unlabeled instance.
struct PseudoAnnotation {
    std::size_t instance = 0;  ///< index into the dataset universe
    PmiAssignment pmi;
    double weight = 0.0;
    double reliability = 0.0;  ///< filled in only at knowledge-update steps
};

/// Pseudo labels and weights for every current unlabeled instance, in the
/// order of `state.unlabeled()`.
inline std::vector<PseudoAnnotation> annotate_unlabeled(const DatasetState& state,
                                                        const WeightFunctionSpec& spec = {}) {
    std::vector<PseudoAnnotation> out;
    if (state.unlabeled().empty()) return out;
    const LabeledPool pool = state.labeled_pool();
    out.reserve(state.unlabeled().size());
    for (std::size_t i : state.unlabeled()) {
        PseudoAnnotation a;
        a.instance = i;
        a.pmi = assign_pseudo_label(state.embedding(i), pool);
        a.weight = compute_weight(a.pmi.p_tilde, a.pmi.q_tilde, spec);
        out.push_back(a);
    }
    return out;
}

}  // namespace wad
