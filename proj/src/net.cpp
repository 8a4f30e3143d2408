#include "prunesim/net.hpp"

#include <cstring>
#include <fstream>

namespace prunesim {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'I', 'M', 'N', 'E', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_tensor(std::ostream& os, const Mat<float>& m) {
  write_u32(os, static_cast<std::uint32_t>(m.rows()));
  write_u32(os, static_cast<std::uint32_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(float) * m.size()));
}

void read_tensor(std::istream& is, Mat<float>& m) {
  const std::uint32_t rows = read_u32(is);
  const std::uint32_t cols = read_u32(is);
  if (rows != m.rows() || cols != m.cols()) {
    throw std::runtime_error("checkpoint: tensor shape mismatch");
  }
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(float) * m.size()));
}

}  // namespace

void save_checkpoint(const PolicyNet<float>& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_u32(os, kVersion);
  const NetArch& a = net.arch();
  write_u32(os, static_cast<std::uint32_t>(a.in_c));
  write_u32(os, static_cast<std::uint32_t>(a.in_h));
  write_u32(os, static_cast<std::uint32_t>(a.in_w));
  write_u32(os, static_cast<std::uint32_t>(a.convs.size()));
  for (const ConvSpec& c : a.convs) {
    write_u32(os, static_cast<std::uint32_t>(c.out_c));
    write_u32(os, static_cast<std::uint32_t>(c.kernel));
    write_u32(os, static_cast<std::uint32_t>(c.stride));
  }
  write_u32(os, static_cast<std::uint32_t>(a.fc_dim));
  write_u32(os, static_cast<std::uint32_t>(a.n_actions));

  std::uint32_t n_tensors = 1;  // log_std
  auto& mut = const_cast<PolicyNet<float>&>(net);
  mut.for_each_param([&](Param<float>&) { ++n_tensors; });
  write_u32(os, n_tensors);
  mut.for_each_param([&](Param<float>& p) { write_tensor(os, p.value); });
  Mat<float> ls = net.log_std;
  write_tensor(os, ls);
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

PolicyNet<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a policy checkpoint: " + path);
  }
  if (read_u32(is) != kVersion) {
    throw std::runtime_error("unsupported checkpoint version: " + path);
  }
  NetArch a;
  a.in_c = static_cast<int>(read_u32(is));
  a.in_h = static_cast<int>(read_u32(is));
  a.in_w = static_cast<int>(read_u32(is));
  const std::uint32_t n_convs = read_u32(is);
  a.convs.clear();
  for (std::uint32_t i = 0; i < n_convs; ++i) {
    ConvSpec c;
    c.out_c = static_cast<int>(read_u32(is));
    c.kernel = static_cast<int>(read_u32(is));
    c.stride = static_cast<int>(read_u32(is));
    a.convs.push_back(c);
  }
  a.fc_dim = static_cast<int>(read_u32(is));
  a.n_actions = static_cast<int>(read_u32(is));

  PolicyNet<float> net(a, 0);
  const std::uint32_t n_tensors = read_u32(is);
  std::uint32_t seen = 1;
  net.for_each_param([&](Param<float>& p) {
    read_tensor(is, p.value);
    ++seen;
  });
  Mat<float> ls(net.log_std.size(), 1);
  read_tensor(is, ls);
  net.log_std = ls.col(0);
  if (!is || seen != n_tensors) {
    throw std::runtime_error("truncated checkpoint: " + path);
  }
  return net;
}

}  // namespace prunesim
