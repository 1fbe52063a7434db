#pragma once

/** @file
 *
 * Master-side operations on block-distributed objects.
 *
 * Every call is one collective over the cluster; results stay on the
 * workers under the given name until collected. Layout arguments with
 * h = 0 use default_replication.
 */

#include <Eigen/Dense>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "biggp/cluster.hpp"
#include "biggp/grid.hpp"

namespace biggp {

using Matrix = Eigen::MatrixXd;

struct DistObject {
  std::string name;
  DistLayout layout;
};

DistLayout triangular_layout(const Cluster& cluster, Index n, int h = 0);
DistLayout rectangular_layout(const Cluster& cluster, Index rows, Index cols, int hn = 0,
                              int hm = 0);
DistLayout vector_layout(const Cluster& cluster, Index n, int h = 0);

/// Scatters a master-side object. Triangular input is read from the lower
/// triangle; padding gets the identity pattern (triangular) or zeros.
DistObject distribute(Cluster& cluster, const std::string& name, const Matrix& value,
                      const DistLayout& layout);
DistObject distribute_vector(Cluster& cluster, const std::string& name,
                             std::span<const double> x, int h = 0);

/// Reassembles the unpadded object: n x 1 for vectors, lower triangle with
/// zeros above for triangular objects.
Matrix collect(Cluster& cluster, const std::string& name);
std::vector<double> collect_vector(Cluster& cluster, const std::string& name);
/// Diagonal of a triangular object (or the entries of a vector).
std::vector<double> collect_diagonal(Cluster& cluster, const std::string& name);

/**
 * Fills a distributed object from a registered entrywise generator.
 * `inputs` maps generator input keys to names of replicated (pushed)
 * objects. With `diagonal`, entry i of a vector is generated at (i, i).
 */
DistObject construct_distributed(Cluster& cluster, const std::string& name,
                                 const DistLayout& layout, const std::string& generator,
                                 std::span<const double> theta,
                                 const std::map<std::string, std::string>& inputs = {},
                                 bool diagonal = false);

/// Standard normal entries drawn from each owner's stream. `zero` fills
/// zeros instead without advancing the streams.
DistObject construct_rnorm(Cluster& cluster, const std::string& name, const DistLayout& layout,
                           bool zero = false);

/// Lower Cholesky factor. Throws NotPositiveDefinite with the failing
/// diagonal block as detail; no output is kept on failure.
DistObject cholesky(Cluster& cluster, const std::string& input, const std::string& output);

enum class Side { Forward, Back };

/// Solves L x = b (forward) or L^T x = b (back) for vector or rectangular b.
DistObject triangular_solve(Cluster& cluster, const std::string& factor, const std::string& rhs,
                            const std::string& output, Side side);
/// L x for vector or rectangular x.
DistObject mult_chol(Cluster& cluster, const std::string& factor, const std::string& x,
                     const std::string& output);

/// V^T u as a vector of length cols(V).
DistObject crossprod_mat_vec(Cluster& cluster, const std::string& v, const std::string& u,
                             const std::string& output);
/// V^T V, lower storage.
DistObject crossprod_self(Cluster& cluster, const std::string& v, const std::string& output);
/// diag(V^T V) as a vector.
DistObject crossprod_self_diag(Cluster& cluster, const std::string& v, const std::string& output);

/// log det(L L^T) over unpadded diagonal entries.
double log_det_from_chol(Cluster& cluster, const std::string& factor);
/// Sum of squared entries of a distributed vector or rectangular object.
double sum_of_squares(Cluster& cluster, const std::string& name);

/// Element indices held by `rank`, as enumerated on the worker itself.
std::vector<ElementIndex> remote_get_indices(Cluster& cluster, const DistLayout& layout, int rank);

/// The next `count` draws of worker `rank`'s stream.
std::vector<double> worker_standard_normals(Cluster& cluster, int rank, std::size_t count);

}  // namespace biggp
