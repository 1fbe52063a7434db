#include "biggp/wire.hpp"

#include <bit>
#include <cstring>

#include "biggp/error.hpp"

namespace biggp::wire {

namespace {

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string string(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), len);
    pos_ += len;
    return s;
  }

  void doubles(std::vector<double>& out, std::size_t count) {
    need(count * sizeof(double));
    out.resize(count);
    std::memcpy(out.data(), data_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) raise(ErrorKind::Internal, "truncated frame");
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode(const Message& m) {
  std::vector<std::uint8_t> out;
  std::uint64_t body = 4 + 4 + 4 + m.tag.name.size() + 12 + 8 + 8 * m.payload.size();
  out.reserve(kHeaderBytes + body);
  put<std::uint8_t>(out, kWireVersion);
  put<std::uint64_t>(out, body);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.src));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.dst));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.tag.name.size()));
  out.insert(out.end(), m.tag.name.begin(), m.tag.name.end());
  put<std::uint32_t>(out, m.tag.phase);
  put<std::uint32_t>(out, m.tag.row);
  put<std::uint32_t>(out, m.tag.col);
  put<std::uint64_t>(out, m.payload.size());
  const auto* raw = reinterpret_cast<const std::uint8_t*>(m.payload.data());
  out.insert(out.end(), raw, raw + 8 * m.payload.size());
  return out;
}

std::uint64_t body_length(std::span<const std::uint8_t> header) {
  Reader r(header);
  auto version = r.get<std::uint8_t>();
  if (version != kWireVersion)
    raise(ErrorKind::Internal, "unsupported frame version " + std::to_string(version));
  return r.get<std::uint64_t>();
}

Message decode_body(std::span<const std::uint8_t> body) {
  Reader r(body);
  Message m;
  m.src = static_cast<int>(r.get<std::uint32_t>());
  m.dst = static_cast<int>(r.get<std::uint32_t>());
  auto len = r.get<std::uint32_t>();
  m.tag.name = r.string(len);
  m.tag.phase = r.get<std::uint32_t>();
  m.tag.row = r.get<std::uint32_t>();
  m.tag.col = r.get<std::uint32_t>();
  auto count = r.get<std::uint64_t>();
  r.doubles(m.payload, count);
  if (!r.done()) raise(ErrorKind::Internal, "trailing bytes in frame");
  return m;
}

}  // namespace biggp::wire
