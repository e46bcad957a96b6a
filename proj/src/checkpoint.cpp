#include "kgsum/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace kgsum {

namespace {

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  std::uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

void write_matrix(std::ostream& out, const nn::Matrix& m) {
  write_u64(out, static_cast<std::uint64_t>(m.rows()));
  write_u64(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

nn::Matrix read_matrix(std::istream& in) {
  std::uint64_t rows = read_u64(in), cols = read_u64(in);
  nn::Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  return m;
}

}  // namespace

void write_parameter_block(std::ostream& out, const nn::ParameterSet& params) {
  auto all = params.all();
  write_u64(out, all.size());
  for (const nn::Parameter* p : all) {
    write_string(out, p->name);
    write_matrix(out, p->value);
  }
}

void read_parameter_block(std::istream& in, nn::ParameterSet& params) {
  std::uint64_t count = read_u64(in);
  if (count != params.size())
    throw std::runtime_error("checkpoint parameter count mismatch: file has " +
                             std::to_string(count) + ", model has " +
                             std::to_string(params.size()));
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    nn::Matrix m = read_matrix(in);
    nn::Parameter* p = params.find(name);
    if (!p) throw std::runtime_error("checkpoint has unknown parameter: " + name);
    if (p->value.rows() != m.rows() || p->value.cols() != m.cols())
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    p->value = std::move(m);
  }
  if (!in) throw std::runtime_error("truncated checkpoint");
}

void save_parameters(const nn::ParameterSet& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << "KGSUMPAR1\n";
  write_parameter_block(out, params);
}

void load_parameters(nn::ParameterSet& params, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != "KGSUMPAR1") throw std::runtime_error("not a checkpoint file: " + path);
  read_parameter_block(in, params);
}

void save_optimizer(const nn::ParameterSet& params, const nn::Adam& opt,
                    const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write optimizer state: " + path);
  out << "KGSUMOPT1\n";
  write_u64(out, static_cast<std::uint64_t>(opt.step_count()));
  auto all = params.all();
  write_u64(out, all.size());
  for (const nn::Parameter* p : all) {
    write_string(out, p->name);
    nn::Matrix m = p->adam_m.size() ? p->adam_m : nn::Matrix::Zero(p->value.rows(), p->value.cols());
    nn::Matrix v = p->adam_v.size() ? p->adam_v : nn::Matrix::Zero(p->value.rows(), p->value.cols());
    write_matrix(out, m);
    write_matrix(out, v);
  }
}

void load_optimizer(nn::ParameterSet& params, nn::Adam& opt, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read optimizer state: " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != "KGSUMOPT1") throw std::runtime_error("not an optimizer file: " + path);
  opt.set_step_count(static_cast<long>(read_u64(in)));
  std::uint64_t count = read_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    nn::Matrix m = read_matrix(in);
    nn::Matrix v = read_matrix(in);
    nn::Parameter* p = params.find(name);
    if (!p) throw std::runtime_error("optimizer state has unknown parameter: " + name);
    p->adam_m = std::move(m);
    p->adam_v = std::move(v);
  }
  if (!in) throw std::runtime_error("truncated optimizer state");
}

}  // namespace kgsum
