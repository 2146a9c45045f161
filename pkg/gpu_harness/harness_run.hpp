// Execution flow of the host harness: load inputs, bind device buffers,
// launch the kernel entry once per case for correctness outputs, then run
// the warm-up/timed-repetition protocol on the first case and write the
// timing file.
//
// Compile with -DKF_WITH_CUDA under nvcc for device execution; without it
// the same flow runs on the host (buffers on the heap, launches as direct
// calls, wall-clock timing), which exercises every format and protocol
// detail with a plain C++ toolchain.
//
// Exit codes: 10 manifest/file problem, 11 device or allocation failure,
// 12 kernel launch failure.

#pragma once

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "harness_io.hpp"

#ifdef KF_WITH_CUDA
#include <cuda_runtime.h>
#endif

// Provided by the kernel source compiled together with this harness.
// `tensors` holds device pointers for every tensor parameter in signature
// order (inputs and outputs interleaved as declared); `scalars` holds the
// scalar parameters in signature order; `dims` are the task's bound
// symbolic dimensions. grid/block of zeros means kernel-declared geometry.
extern "C" void kernel_entry(void* const* tensors, const double* scalars,
                             const long long* dims, int n_tensors,
                             int n_scalars, int n_dims, const int* grid,
                             const int* block, void* stream);

namespace kfharness {

constexpr int kExitFile = 10;
constexpr int kExitDevice = 11;
constexpr int kExitLaunch = 12;

struct DeviceBuffer {
  void* ptr = nullptr;
  size_t size = 0;
};

#ifdef KF_WITH_CUDA

inline bool dev_alloc(DeviceBuffer& buf, size_t size) {
  buf.size = size;
  return cudaMalloc(&buf.ptr, size) == cudaSuccess;
}

inline void dev_free(DeviceBuffer& buf) {
  if (buf.ptr) cudaFree(buf.ptr);
  buf.ptr = nullptr;
}

inline bool dev_upload(DeviceBuffer& buf, const void* host, size_t size) {
  return cudaMemcpy(buf.ptr, host, size, cudaMemcpyHostToDevice) == cudaSuccess;
}

inline bool dev_download(void* host, const DeviceBuffer& buf, size_t size) {
  return cudaMemcpy(host, buf.ptr, size, cudaMemcpyDeviceToHost) == cudaSuccess;
}

inline bool dev_zero(DeviceBuffer& buf) {
  return cudaMemset(buf.ptr, 0, buf.size) == cudaSuccess;
}

inline bool dev_sync_ok(std::string& message) {
  cudaError_t err = cudaGetLastError();
  if (err == cudaSuccess) err = cudaDeviceSynchronize();
  if (err != cudaSuccess) {
    message = cudaGetErrorString(err);
    return false;
  }
  return true;
}

#else  // CPU fallback: heap buffers, direct calls

inline bool dev_alloc(DeviceBuffer& buf, size_t size) {
  buf.ptr = std::malloc(size);
  buf.size = size;
  return buf.ptr != nullptr;
}

inline void dev_free(DeviceBuffer& buf) {
  std::free(buf.ptr);
  buf.ptr = nullptr;
}

inline bool dev_upload(DeviceBuffer& buf, const void* host, size_t size) {
  std::memcpy(buf.ptr, host, size);
  return true;
}

inline bool dev_download(void* host, const DeviceBuffer& buf, size_t size) {
  std::memcpy(host, buf.ptr, size);
  return true;
}

inline bool dev_zero(DeviceBuffer& buf) {
  std::memset(buf.ptr, 0, buf.size);
  return true;
}

inline bool dev_sync_ok(std::string&) { return true; }

#endif

struct BoundCase {
  std::vector<void*> tensor_ptrs;          // signature order
  std::vector<double> scalars;             // signature order
  std::vector<DeviceBuffer> buffers;       // owned device buffers
  std::vector<size_t> output_param_index;  // indices into params with kTensorOut
};

inline void release(BoundCase& bound) {
  for (auto& buf : bound.buffers) dev_free(buf);
  bound.buffers.clear();
}

inline bool launch_once(const Manifest& m, BoundCase& bound, std::string& message) {
  kernel_entry(bound.tensor_ptrs.data(), bound.scalars.data(), m.dims.data(),
               static_cast<int>(bound.tensor_ptrs.size()),
               static_cast<int>(bound.scalars.size()),
               static_cast<int>(m.dims.size()), m.grid, m.block, nullptr);
  return dev_sync_ok(message);
}

inline double time_one_launch(const Manifest& m, BoundCase& bound, std::string& message,
                              bool& ok) {
#ifdef KF_WITH_CUDA
  cudaEvent_t ev_start, ev_stop;
  if (cudaEventCreate(&ev_start) != cudaSuccess ||
      cudaEventCreate(&ev_stop) != cudaSuccess) {
    ok = false;
    message = "cudaEventCreate failed";
    return 0.0;
  }
  cudaEventRecord(ev_start);
  kernel_entry(bound.tensor_ptrs.data(), bound.scalars.data(), m.dims.data(),
               static_cast<int>(bound.tensor_ptrs.size()),
               static_cast<int>(bound.scalars.size()),
               static_cast<int>(m.dims.size()), m.grid, m.block, nullptr);
  cudaEventRecord(ev_stop);
  cudaError_t err = cudaGetLastError();
  if (err == cudaSuccess) err = cudaEventSynchronize(ev_stop);
  float ms = 0.0f;
  if (err == cudaSuccess) err = cudaEventElapsedTime(&ms, ev_start, ev_stop);
  cudaEventDestroy(ev_start);
  cudaEventDestroy(ev_stop);
  if (err != cudaSuccess) {
    ok = false;
    message = cudaGetErrorString(err);
    return 0.0;
  }
  ok = true;
  double us = static_cast<double>(ms) * 1000.0;
  return us > 1e-3 ? us : 1e-3;  // event resolution floor keeps entries positive
#else
  auto t0 = std::chrono::steady_clock::now();
  bool sync_ok = launch_once(m, bound, message);
  auto t1 = std::chrono::steady_clock::now();
  ok = sync_ok;
  double us =
      std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count() / 1000.0;
  return us > 1e-3 ? us : 1e-3;
#endif
}

inline int run_manifest(const std::string& manifest_path) {
  Manifest m;
  try {
    m = parse_manifest(manifest_path);
  } catch (const std::exception& exc) {
    std::fprintf(stderr, "manifest error: %s\n", exc.what());
    return kExitFile;
  }

  // Read every input up front so a missing file never leaves partial outputs.
  std::vector<std::vector<TensorFile>> host_inputs(m.cases.size());
  try {
    for (size_t c = 0; c < m.cases.size(); ++c) {
      for (const auto& p : m.cases[c].params) {
        if (p.kind == ParamBinding::kTensorIn) {
          host_inputs[c].push_back(read_tensor(p.path));
        }
      }
    }
  } catch (const std::exception& exc) {
    std::fprintf(stderr, "input error: %s\n", exc.what());
    return kExitFile;
  }

  const auto wall_start = std::chrono::steady_clock::now();
  BoundCase timing_case;  // case 0 stays bound for the timing phase
  std::string message;

  for (size_t c = 0; c < m.cases.size(); ++c) {
    BoundCase bound;
    size_t input_idx = 0;
    bool alloc_failed = false;
    for (const auto& p : m.cases[c].params) {
      if (p.kind == ParamBinding::kScalar) {
        bound.scalars.push_back(p.scalar);
        continue;
      }
      DeviceBuffer buf;
      if (p.kind == ParamBinding::kTensorIn) {
        const TensorFile& t = host_inputs[c][input_idx++];
        if (!dev_alloc(buf, t.data.size()) || !dev_upload(buf, t.data.data(), t.data.size())) {
          alloc_failed = true;
        }
      } else {
        TensorFile shape_only;
        shape_only.dtype_code = p.dtype_code;
        shape_only.shape = p.shape;
        if (!dev_alloc(buf, shape_only.byte_size()) || !dev_zero(buf)) {
          alloc_failed = true;
        }
        bound.output_param_index.push_back(bound.tensor_ptrs.size());
      }
      bound.buffers.push_back(buf);
      bound.tensor_ptrs.push_back(buf.ptr);
      if (alloc_failed) break;
    }
    if (alloc_failed) {
      release(bound);
      release(timing_case);
      std::fprintf(stderr, "device allocation failed for case %s\n",
                   m.cases[c].case_id.c_str());
      return kExitDevice;
    }

    if (!launch_once(m, bound, message)) {
      release(bound);
      release(timing_case);
      std::fprintf(stderr, "kernel launch failed on case %s: %s\n",
                   m.cases[c].case_id.c_str(), message.c_str());
      return kExitLaunch;
    }

    // Copy outputs back once and write them atomically.
    size_t out_cursor = 0;
    for (const auto& p : m.cases[c].params) {
      if (p.kind != ParamBinding::kTensorOut) continue;
      TensorFile t;
      t.dtype_code = p.dtype_code;
      t.shape = p.shape;
      t.data.resize(t.byte_size());
      const DeviceBuffer& buf = bound.buffers[bound.output_param_index[out_cursor++]];
      if (!dev_download(t.data.data(), buf, t.data.size())) {
        release(bound);
        release(timing_case);
        std::fprintf(stderr, "device download failed for %s\n", p.name.c_str());
        return kExitDevice;
      }
      try {
        write_tensor_atomic(p.path, t);
      } catch (const std::exception& exc) {
        release(bound);
        release(timing_case);
        std::fprintf(stderr, "output write failed: %s\n", exc.what());
        return kExitFile;
      }
    }

    if (c == 0) {
      timing_case = bound;  // keep buffers alive for the timing phase
    } else {
      release(bound);
    }
  }

  // Warm-up launches, untimed.
  for (int i = 0; i < m.warmup; ++i) {
    if (!launch_once(m, timing_case, message)) {
      release(timing_case);
      std::fprintf(stderr, "kernel launch failed during warm-up: %s\n", message.c_str());
      return kExitLaunch;
    }
  }

  // Timed repetitions, synchronized per repetition.
  std::vector<double> samples_us;
  samples_us.reserve(m.timed);
  for (int i = 0; i < m.timed; ++i) {
    bool ok = true;
    double us = time_one_launch(m, timing_case, message, ok);
    if (!ok) {
      release(timing_case);
      std::fprintf(stderr, "kernel launch failed during timing: %s\n", message.c_str());
      return kExitLaunch;
    }
    samples_us.push_back(us);
  }
  release(timing_case);

  const auto wall_end = std::chrono::steady_clock::now();
  double host_total_us =
      std::chrono::duration_cast<std::chrono::nanoseconds>(wall_end - wall_start).count() /
      1000.0;
  try {
    write_timing_atomic(m.timing_path, m.shape_label, m.warmup, samples_us, host_total_us);
  } catch (const std::exception& exc) {
    std::fprintf(stderr, "timing write failed: %s\n", exc.what());
    return kExitFile;
  }
  return 0;
}

}  // namespace kfharness
