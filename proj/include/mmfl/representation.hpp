#pragma once
#include <vector>

#include "mmfl/autodiff.hpp"

namespace mmfl {

// Mean imputation: available modalities pass through, missing ones receive the
// arithmetic mean of the available features. Throws AllMissing when nothing is
// available.
std::vector<ad::Var> impute(ad::Tape& tape, const std::vector<ad::Var>& features,
                            const std::vector<uint8_t>& available);

// Shared contrastive form of the data-specific loss and the reconfiguration
// loss. `stacked` holds one feature per column (l2-normalized internally);
// instance_ids[j] names the instance column j belongs to. Numerator: ordered
// same-instance pairs with distinct columns; denominator: all cross-instance
// ordered pairs. Throws InsufficientBatch with fewer than 2 distinct instances.
ad::Var contrastive_alignment_loss(ad::Tape& tape, ad::Var stacked,
                                   const std::vector<int>& instance_ids);

} // namespace mmfl
