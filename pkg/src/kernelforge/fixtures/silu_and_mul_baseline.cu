// silu_and_mul: gated activation, out = silu(x) * g. One thread per
// element, scalar half loads, library math for the sigmoid.
//
// Layout: x, g, out are [rows, hidden] half, treated as flat arrays.

#include <cuda_fp16.h>
#include <cuda_runtime.h>
#include <math.h>

__device__ float silu_f(float v) {
  return v / (1.0f + expf(-v));
}

__global__ void silu_and_mul_kernel(
    const __half* __restrict__ x,
    const __half* __restrict__ g,
    __half* __restrict__ out,
    long long n) {
  long long idx = blockIdx.x * (long long)blockDim.x + threadIdx.x;
  long long stride = (long long)blockDim.x * gridDim.x;
  for (long long i = idx; i < n; i += stride) {
    __half xv = x[i];
    __half gv = g[i];
    float activated = silu_f(__half2float(xv));
    out[i] = __float2half(activated * __half2float(gv));
  }
}

extern "C" void kernel_entry(void* const* tensors,
                             const double* scalars,
                             const long long* dims,
                             int n_tensors,
                             int n_scalars,
                             int n_dims,
                             const int* grid,
                             const int* block,
                             void* stream) {
  (void)scalars;
  (void)n_scalars;
  (void)n_tensors;
  (void)n_dims;
  long long rows = dims[0];
  long long hidden = dims[1];
  long long n = rows * hidden;

  const __half* x = static_cast<const __half*>(tensors[0]);
  const __half* g = static_cast<const __half*>(tensors[1]);
  __half* out = static_cast<__half*>(tensors[2]);

  int threads = (block != nullptr && block[0] > 0) ? block[0] : 256;
  long long blocks = (grid != nullptr && grid[0] > 0)
                         ? grid[0]
                         : (n + threads - 1) / threads;
  if (blocks > 65535) {
    blocks = 65535;
  }
  cudaStream_t s = static_cast<cudaStream_t>(stream);
  silu_and_mul_kernel<<<(unsigned int)blocks, threads, 0, s>>>(x, g, out, n);
}
