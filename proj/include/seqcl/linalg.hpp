#pragma once

#include "seqcl/matrix.hpp"

namespace seqcl {

/// log|k + jitter*I| of a symmetric PSD matrix via Cholesky.
///
/// If the factorization fails at the requested jitter the routine escalates
/// along a fixed ladder (base, 10x, 100x, 1000x; base defaults to
/// 1e-6 * mean diagonal when the caller passed 0) so that low-diversity
/// kernels still produce finite, comparable scores. Throws ShapeError for a
/// non-square or asymmetric input, DomainError for negative jitter, and
/// SingularError (carrying the attempted ladder) when every rung fails.
double log_det_psd(const Matrix& k, double jitter);

} // namespace seqcl
