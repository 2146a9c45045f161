// merge_attn_states_lse: combine two partial attention results (values +
// log-sum-exp scores) into one. Extracted as a stand-alone kernel; the host
// harness supplies buffers and launch parameters through kernel_entry.
//
// Layout: Va, Vb, Vout are [seq, heads, dim] half; Sa, Sb, Sout are
// [seq, heads] float. One thread handles one (seq, head) pair.

#include <cuda_fp16.h>
#include <cuda_runtime.h>
#include <math.h>

__global__ void merge_attn_states_lse_kernel(
    const __half* __restrict__ va,
    const float* __restrict__ sa,
    const __half* __restrict__ vb,
    const float* __restrict__ sb,
    __half* __restrict__ vout,
    float* __restrict__ sout,
    long long n_pairs,
    long long dim) {
  long long pair = blockIdx.x * (long long)blockDim.x + threadIdx.x;
  if (pair >= n_pairs) {
    return;
  }

  const __half* va_row = va + pair * dim;
  const __half* vb_row = vb + pair * dim;
  __half* out_row = vout + pair * dim;

  // two scalar scores for this (seq, head) pair
  float score_a = sa[pair];
  float score_b = sb[pair];

  for (long long d = 0; d < dim; ++d) {
    float smax = fmaxf(score_a, score_b);
    float wa = expf(score_a - smax);
    float wb = expf(score_b - smax);
    float inv = 1.0f / (wa + wb + 1e-12f);
    float a = wa * inv;
    float b = wb * inv;
    float merged = a * __half2float(va_row[d]) + b * __half2float(vb_row[d]);
    out_row[d] = __float2half(merged);
  }

  float smax = fmaxf(score_a, score_b);
  float wa = expf(score_a - smax);
  float wb = expf(score_b - smax);
  sout[pair] = smax + logf(wa + wb);
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
  long long seq = dims[0];
  long long heads = dims[1];
  long long dim = dims[2];
  long long n_pairs = seq * heads;

  const __half* va = static_cast<const __half*>(tensors[0]);
  const float* sa = static_cast<const float*>(tensors[1]);
  const __half* vb = static_cast<const __half*>(tensors[2]);
  const float* sb = static_cast<const float*>(tensors[3]);
  __half* vout = static_cast<__half*>(tensors[4]);
  float* sout = static_cast<float*>(tensors[5]);

  int threads = (block != nullptr && block[0] > 0) ? block[0] : 256;
  long long blocks = (grid != nullptr && grid[0] > 0)
                         ? grid[0]
                         : (n_pairs + threads - 1) / threads;
  cudaStream_t s = static_cast<cudaStream_t>(stream);
  merge_attn_states_lse_kernel<<<(unsigned int)blocks, threads, 0, s>>>(
      va, sa, vb, sb, vout, sout, n_pairs, dim);
}
