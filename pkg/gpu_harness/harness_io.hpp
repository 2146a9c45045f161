// File formats spoken across the process boundary with the optimization
// harness: KFT1 binary tensors, the KFMAN1 manifest emitted by the
// executor, and the KFTIME1 timing file written back. All output files are
// written to a temporary name and renamed, so readers never see partials.

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kfharness {

inline constexpr char kTensorMagic[4] = {'K', 'F', 'T', '1'};
inline const std::string kManifestMagic = "KFMAN1";
inline const std::string kTimingMagic = "KFTIME1";

struct TensorFile {
  int dtype_code = 0;  // 0 = f32, 1 = f16
  std::vector<uint64_t> shape;
  std::vector<uint8_t> data;  // raw little-endian payload

  size_t element_size() const { return dtype_code == 0 ? 4 : 2; }

  uint64_t element_count() const {
    uint64_t n = 1;
    for (uint64_t e : shape) n *= e;
    return n;
  }

  size_t byte_size() const { return element_count() * element_size(); }
};

inline int dtype_code_from_name(const std::string& name) {
  if (name == "f32") return 0;
  if (name == "f16") return 1;
  throw std::runtime_error("unknown dtype name: " + name);
}

inline TensorFile read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open tensor file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kTensorMagic, 4) != 0)
    throw std::runtime_error("bad tensor magic in " + path);
  uint8_t code = 0;
  uint32_t ndim = 0;
  in.read(reinterpret_cast<char*>(&code), 1);
  in.read(reinterpret_cast<char*>(&ndim), 4);
  if (!in || (code != 0 && code != 1))
    throw std::runtime_error("bad tensor header in " + path);
  if (ndim == 0 || ndim > 64)
    throw std::runtime_error("bad tensor rank in " + path);
  TensorFile t;
  t.dtype_code = code;
  t.shape.resize(ndim);
  in.read(reinterpret_cast<char*>(t.shape.data()), 8 * ndim);
  if (!in) throw std::runtime_error("truncated extent list in " + path);
  t.data.resize(t.byte_size());
  in.read(reinterpret_cast<char*>(t.data.data()), t.data.size());
  if (!in) throw std::runtime_error("truncated tensor payload in " + path);
  return t;
}

inline void atomic_write(const std::string& path, const char* bytes, size_t n) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp);
    out.write(bytes, static_cast<std::streamsize>(n));
    if (!out) throw std::runtime_error("short write: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

inline void write_tensor_atomic(const std::string& path, const TensorFile& t) {
  std::string buf;
  buf.reserve(9 + 8 * t.shape.size() + t.data.size());
  buf.append(kTensorMagic, 4);
  uint8_t code = static_cast<uint8_t>(t.dtype_code);
  buf.append(reinterpret_cast<const char*>(&code), 1);
  uint32_t ndim = static_cast<uint32_t>(t.shape.size());
  buf.append(reinterpret_cast<const char*>(&ndim), 4);
  buf.append(reinterpret_cast<const char*>(t.shape.data()), 8 * t.shape.size());
  buf.append(reinterpret_cast<const char*>(t.data.data()), t.data.size());
  atomic_write(path, buf.data(), buf.size());
}

// --- manifest ---------------------------------------------------------

struct ParamBinding {
  enum Kind { kTensorIn, kScalar, kTensorOut };
  Kind kind = kTensorIn;
  std::string name;
  std::string path;   // tensor bindings
  double scalar = 0;  // scalar bindings
  int dtype_code = 0;              // outputs
  std::vector<uint64_t> shape;     // outputs
};

struct CaseSpec {
  std::string case_id;
  std::vector<ParamBinding> params;  // signature order
};

struct Manifest {
  std::string entry;
  std::string shape_label;
  std::string timing_path;
  int warmup = 0;
  int timed = 1;
  int grid[3] = {0, 0, 0};
  int block[3] = {0, 0, 0};
  std::vector<long long> dims;
  std::vector<CaseSpec> cases;
};

inline std::string rest_of_line(std::istringstream& ss) {
  std::string rest;
  std::getline(ss, rest);
  size_t start = rest.find_first_not_of(' ');
  return start == std::string::npos ? std::string() : rest.substr(start);
}

inline Manifest parse_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kManifestMagic)
    throw std::runtime_error("bad manifest magic in " + path);
  Manifest m;
  CaseSpec current;
  bool in_case = false;
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "entry") {
      ss >> m.entry;
    } else if (key == "shape_label") {
      ss >> m.shape_label;
    } else if (key == "warmup") {
      ss >> m.warmup;
    } else if (key == "timed") {
      ss >> m.timed;
    } else if (key == "launch") {
      std::string kind;
      ss >> kind;
      if (kind == "grid") {
        std::string blk;
        ss >> m.grid[0] >> m.grid[1] >> m.grid[2] >> blk >> m.block[0] >> m.block[1] >> m.block[2];
        if (!ss || blk != "block")
          throw std::runtime_error("bad launch line: " + line);
      } else if (kind != "kernel-declared") {
        throw std::runtime_error("bad launch kind: " + kind);
      }
    } else if (key == "dims") {
      size_t count = 0;
      ss >> count;
      m.dims.resize(count);
      for (size_t i = 0; i < count; ++i) ss >> m.dims[i];
      if (!ss) throw std::runtime_error("bad dims line: " + line);
    } else if (key == "timing") {
      m.timing_path = rest_of_line(ss);
    } else if (key == "case") {
      if (in_case) throw std::runtime_error("nested case in manifest");
      current = CaseSpec();
      ss >> current.case_id;
      in_case = true;
    } else if (key == "in") {
      if (!in_case) throw std::runtime_error("binding outside case: " + line);
      ParamBinding b;
      std::string kind;
      ss >> b.name >> kind;
      if (kind == "tensor") {
        b.kind = ParamBinding::kTensorIn;
        b.path = rest_of_line(ss);
      } else if (kind == "scalar") {
        b.kind = ParamBinding::kScalar;
        ss >> b.scalar;
        if (!ss) throw std::runtime_error("bad scalar binding: " + line);
      } else {
        throw std::runtime_error("bad input binding kind: " + kind);
      }
      current.params.push_back(b);
    } else if (key == "out") {
      if (!in_case) throw std::runtime_error("binding outside case: " + line);
      ParamBinding b;
      b.kind = ParamBinding::kTensorOut;
      std::string dtype;
      size_t ndim = 0;
      ss >> b.name >> dtype >> ndim;
      if (!ss || ndim == 0 || ndim > 64)
        throw std::runtime_error("bad output binding: " + line);
      b.dtype_code = dtype_code_from_name(dtype);
      b.shape.resize(ndim);
      for (size_t i = 0; i < ndim; ++i) ss >> b.shape[i];
      if (!ss) throw std::runtime_error("bad output extents: " + line);
      b.path = rest_of_line(ss);
      current.params.push_back(b);
    } else if (key == "endcase") {
      if (!in_case) throw std::runtime_error("endcase outside case");
      m.cases.push_back(current);
      in_case = false;
    } else if (key == "end") {
      saw_end = true;
      break;
    } else {
      throw std::runtime_error("unknown manifest key: " + key);
    }
  }
  if (in_case) throw std::runtime_error("unterminated case in manifest");
  if (!saw_end) throw std::runtime_error("manifest missing end marker");
  if (m.cases.empty()) throw std::runtime_error("manifest has no cases");
  if (m.timing_path.empty()) throw std::runtime_error("manifest has no timing path");
  if (m.timed < 1) throw std::runtime_error("timed repetitions must be >= 1");
  return m;
}

inline void write_timing_atomic(const std::string& path, const std::string& label,
                                int warmup, const std::vector<double>& values_us,
                                double host_total_us) {
  std::ostringstream out;
  out << kTimingMagic << ' ' << label << ' ' << warmup << ' ' << values_us.size()
      << " host_total_us=" << host_total_us << '\n';
  char buf[64];
  for (double v : values_us) {
    std::snprintf(buf, sizeof(buf), "%.6f\n", v);
    out << buf;
  }
  const std::string text = out.str();
  atomic_write(path, text.data(), text.size());
}

}  // namespace kfharness
