#ifndef SCPGAN_H
#define SCPGAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScpBranch {
  SCP_BRANCH_ACUTE_ACUTE = 0,
  SCP_BRANCH_ACUTE_OBTUSE = 1,
  SCP_BRANCH_OBTUSE_ACUTE = 2,
  SCP_BRANCH_OBTUSE_OBTUSE = 3,
  SCP_BRANCH_TWO_PART_ACUTE = 4,
  SCP_BRANCH_TWO_PART_OBTUSE = 5,
} ScpBranch;

typedef enum ScpStatus {
  SCP_STATUS_OK = 0,
  SCP_STATUS_NULL_POINTER = 1,
  SCP_STATUS_INVALID_ARGUMENT = 2,
  SCP_STATUS_LENGTH_MISMATCH = 3,
  SCP_STATUS_IO = 4,
  SCP_STATUS_FORMAT = 5,
  SCP_STATUS_INTERNAL = 6,
} ScpStatus;

typedef enum ScpWindow {
  // Hann analysis, rectangular synthesis.
  SCP_WINDOW_HANN = 0,
  SCP_WINDOW_SQRT_HANN = 1,
} ScpWindow;

// Opaque STFT configuration with its FFT plans.
typedef struct ScpStftPlan ScpStftPlan;

// Opaque decoded mono waveform.
typedef struct ScpWave ScpWave;

// Part weights of a corrected discriminator direction. `w_n` is only
// meaningful when `has_w_n` is nonzero.
typedef struct ScpWeights {
  double w_c;
  double w_e;
  double w_n;
  uint8_t has_w_n;
  uint8_t degenerate;
  enum ScpBranch branch;
} ScpWeights;

typedef struct ScpSsnrParams {
  size_t frame_len;
  double clamp_lo;
  double clamp_hi;
  double silence_floor;
} ScpSsnrParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a
// successful one. Valid until the next call into this library on the
// same thread.
const char *scp_last_error(void);

// # Safety
// `out` must be a valid pointer; on success it receives a handle to free
// with [`scp_stft_plan_free`].
enum ScpStatus scp_stft_plan_new(size_t fft_size,
                                 size_t hop,
                                 enum ScpWindow window,
                                 uint8_t center_pad,
                                 struct ScpStftPlan **out);

// # Safety
// `plan` must be null or a live handle from [`scp_stft_plan_new`].
void scp_stft_plan_free(struct ScpStftPlan *plan);

// Frequency bins per frame, `fft_size / 2 + 1`.
//
// # Safety
// `plan` must be a live handle; `out` a valid pointer.
enum ScpStatus scp_stft_bins(const struct ScpStftPlan *plan, size_t *out);

// Frame count for a signal of `len` samples.
//
// # Safety
// `plan` must be a live handle; `out` a valid pointer.
enum ScpStatus scp_stft_frames(const struct ScpStftPlan *plan, size_t len, size_t *out);

// Analyses `signal` into frame-major real and imaginary planes of
// `frames × bins` values each.
//
// # Safety
// `signal` must hold `len` values; `re` and `im` must hold `out_len`.
enum ScpStatus scp_stft(const struct ScpStftPlan *plan,
                        const double *signal,
                        size_t len,
                        double *re,
                        double *im,
                        size_t out_len);

// Synthesises `out_len` samples from planes of `n` bins each. `n` must
// equal the frame count for `out_len` times the bin count.
//
// # Safety
// `re` and `im` must hold `n` values; `out` must hold `out_len`.
enum ScpStatus scp_istft(const struct ScpStftPlan *plan,
                         const double *re,
                         const double *im,
                         size_t n,
                         double *out,
                         size_t out_len);

// Nearest consistent spectrogram: STFT of the iSTFT of the input, for a
// signal of `origin_len` samples.
//
// # Safety
// All four planes must hold `n` values.
enum ScpStatus scp_consistency_project(const struct ScpStftPlan *plan,
                                       const double *re,
                                       const double *im,
                                       size_t n,
                                       size_t origin_len,
                                       double *re_out,
                                       double *im_out);

// Two-part weights for the clean and enhanced loss gradients.
//
// # Safety
// `gc` and `ge` must hold `dim` values; `out` must be valid.
enum ScpStatus scp_sc2_weights(const double *gc,
                               const double *ge,
                               size_t dim,
                               struct ScpWeights *out);

// Three-part weights including the noisy loss gradient.
//
// # Safety
// `gc`, `ge` and `gn` must hold `dim` values; `out` must be valid.
enum ScpStatus scp_sc3_weights(const double *gc,
                               const double *ge,
                               const double *gn,
                               size_t dim,
                               struct ScpWeights *out);

struct ScpSsnrParams scp_ssnr_params_default(void);

// Segmental SNR in dB of `enhanced` against `clean`.
//
// # Safety
// Both signals must hold `len` values; `params` and `out` must be valid.
enum ScpStatus scp_ssnr(const double *enhanced,
                        const double *clean,
                        size_t len,
                        uint32_t sample_rate,
                        const struct ScpSsnrParams *params,
                        double *out);

// Reads a mono 16-bit PCM WAV file.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string; `out` must be valid. On
// success the handle is freed with [`scp_wave_free`].
enum ScpStatus scp_wav_read(const char *path, struct ScpWave **out);

// # Safety
// `wave` must be null or a live handle from [`scp_wav_read`].
void scp_wave_free(struct ScpWave *wave);

// Sample count, or 0 for a null handle.
//
// # Safety
// `wave` must be null or a live handle.
size_t scp_wave_len(const struct ScpWave *wave);

// # Safety
// `wave` must be null or a live handle.
uint32_t scp_wave_sample_rate(const struct ScpWave *wave);

// Borrowed samples in [-1, 1), valid while the handle lives.
//
// # Safety
// `wave` must be null or a live handle.
const double *scp_wave_samples(const struct ScpWave *wave);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCPGAN_H */
