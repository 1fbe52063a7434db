#include "biggp/rng.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>

#include "biggp/error.hpp"

namespace biggp {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

double uniform_open(std::uint32_t hi, std::uint32_t lo) {
  std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double normal_quantile(double u) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

NormalStream::NormalStream(std::uint64_t master_seed, int rank)
    : key_{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32)},
      rank_(static_cast<std::uint32_t>(rank)) {}

// Each Philox block yields four words, i.e. two normals.
double NormalStream::at(std::uint64_t position) const {
  std::uint64_t block = position / 2;
  Philox4x32::Counter ctr{static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                          0u, rank_};
  auto out = Philox4x32::block(ctr, key_);
  return position % 2 == 0 ? normal_quantile(uniform_open(out[0], out[1]))
                           : normal_quantile(uniform_open(out[2], out[3]));
}

double NormalStream::next() { return at(position_++); }

void NormalStream::fill(std::span<double> out) {
  for (double& x : out) x = next();
}

void StreamFamily::initialize(std::uint64_t master_seed, int processes) {
  seed_ = master_seed;
  streams_.clear();
  for (int r = 1; r <= processes; ++r) streams_.emplace_back(master_seed, r);
}

std::uint64_t StreamFamily::master_seed() const {
  if (!seed_) raise(ErrorKind::StreamsUninitialized, "random streams have not been initialized");
  return *seed_;
}

NormalStream& StreamFamily::stream(int rank) {
  if (!seed_) raise(ErrorKind::StreamsUninitialized, "random streams have not been initialized");
  if (rank < 1 || rank > static_cast<int>(streams_.size()))
    raise(ErrorKind::InvalidArgument, "no stream for rank " + std::to_string(rank));
  return streams_[static_cast<std::size_t>(rank - 1)];
}

std::vector<double> standard_normals(std::uint64_t master_seed, int rank, std::size_t count) {
  NormalStream s(master_seed, rank);
  std::vector<double> out(count);
  s.fill(out);
  return out;
}

}  // namespace biggp
