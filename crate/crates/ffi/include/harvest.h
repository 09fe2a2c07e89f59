#ifndef HARVEST_H
#define HARVEST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HvPlant {
  HV_PLANT_IDEAL = 0,
  HV_PLANT_NOMINAL = 1,
  HV_PLANT_PERTURBED = 2,
} HvPlant;

typedef enum HvStatus {
  HV_STATUS_OK = 0,
  HV_STATUS_NULL_POINTER = 1,
  HV_STATUS_INVALID_ARGUMENT = 2,
  HV_STATUS_OUT_OF_REACH = 3,
  HV_STATUS_LIMIT_VIOLATION = 4,
  HV_STATUS_SINGULARITY = 5,
  HV_STATUS_PERCEPTION_FAILED = 6,
  HV_STATUS_SIMULATION_FAILED = 7,
  HV_STATUS_PANIC = 8,
} HvStatus;

typedef enum HvController {
  HV_CONTROLLER_PROPOSED = 0,
  HV_CONTROLLER_OPEN_LOOP = 1,
  HV_CONTROLLER_POSITION_MODE = 2,
} HvController;

/*
 Opaque simulation configuration.
 */
typedef struct HvConfig HvConfig;

/*
 Opaque single-axis quintic.
 */
typedef struct HvQuintic HvQuintic;

/*
 Joint values: radians, radians, meters.
 */
typedef struct HvJoint {
  double phi;
  double theta;
  double d;
} HvJoint;

/*
 Base-frame point, meters.
 */
typedef struct HvPoint {
  double x;
  double y;
  double z;
} HvPoint;

typedef struct HvSample {
  double position;
  double velocity;
  double acceleration;
} HvSample;

typedef struct HvTrialResult {
  /*
   Distance to the target at the end of the approach, meters.
   */
  double final_error;
  /*
   1 when the approach finished under the success threshold.
   */
  int success;
  /*
   1 when the whole cycle reached the home pose again.
   */
  int completed;
  /*
   Sum of the phase durations, seconds.
   */
  double cycle_time;
} HvTrialResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *hv_version(void);

/*
 Copy the calling thread's last error message into `buf` (always
 NUL-terminated when `len > 0`). Returns the full message length in bytes,
 excluding the terminator.

 # Safety
 `buf` must be null or point to at least `len` writable bytes.
 */
size_t hv_last_error_message(char *buf, size_t len);

/*
 New configuration with library defaults and the given plant preset.
 */
struct HvConfig *hv_config_new(enum HvPlant plant);

/*
 # Safety
 `cfg` must be null or a handle from [`hv_config_new`] not yet freed.
 */
void hv_config_free(struct HvConfig *cfg);

/*
 Set the Cartesian error gains `k1`, `k2` (1/s).

 # Safety
 `cfg` must be a live handle.
 */
enum HvStatus hv_config_set_gains(struct HvConfig *cfg, double k1, double k2);

/*
 Set the link lengths `d1`, `d2`, `d3` (m).

 # Safety
 `cfg` must be a live handle.
 */
enum HvStatus hv_config_set_links(struct HvConfig *cfg, double d1, double d2, double d3);

/*
 Forward kinematics. A null `cfg` uses the defaults.

 # Safety
 `cfg` must be null or live; `out` must be writable.
 */
enum HvStatus hv_forward_kinematics(const struct HvConfig *cfg,
                                    struct HvJoint q,
                                    struct HvPoint *out);

/*
 Inverse kinematics with limit checking. A null `cfg` uses the defaults.

 # Safety
 `cfg` must be null or live; `out` must be writable.
 */
enum HvStatus hv_inverse_kinematics(const struct HvConfig *cfg,
                                    struct HvPoint p,
                                    struct HvJoint *out);

/*
 End-effector `(ydot, zdot)` for revolute rates `(omega_phi, omega_theta)`.

 # Safety
 `cfg` must be null or live; `ydot` and `zdot` must be writable.
 */
enum HvStatus hv_velocity_map(const struct HvConfig *cfg,
                              struct HvJoint q,
                              double omega_phi,
                              double omega_theta,
                              double *ydot,
                              double *zdot);

/*
 Closed-loop revolute command for tracking error `(e_y, e_z)` and reference
 velocities `(ydot_r, zdot_r)`.

 # Safety
 `cfg` must be null or live; `omega_phi` and `omega_theta` must be writable.
 */
enum HvStatus hv_velocity_command(const struct HvConfig *cfg,
                                  struct HvJoint q,
                                  double e_y,
                                  double e_z,
                                  double ydot_r,
                                  double zdot_r,
                                  double *omega_phi,
                                  double *omega_theta);

/*
 Localize a detection (pixel box plus `n` range samples in meters) into
 the base frame using the configured camera.

 # Safety
 `cfg` must be null or live; `range` must point to `n` doubles; `out` must
 be writable.
 */
enum HvStatus hv_localize(const struct HvConfig *cfg,
                          double u_min,
                          double v_min,
                          double u_max,
                          double v_max,
                          const double *range,
                          size_t n,
                          struct HvPoint *out);

/*
 Plan a rest-to-rest quintic from `p0` to `pf` over `t_f` seconds.

 # Safety
 `out` must be writable; the handle it receives is freed with
 [`hv_quintic_free`].
 */
enum HvStatus hv_quintic_new(double p0, double pf, double t_f, struct HvQuintic **out);

/*
 Evaluate a quintic at `t` (clamped to `[0, t_f]`).

 # Safety
 `q` must be a live handle; `out` must be writable.
 */
enum HvStatus hv_quintic_eval(const struct HvQuintic *q, double t, struct HvSample *out);

/*
 Write the six polynomial coefficients `a0..a5` into `coeffs`.

 # Safety
 `q` must be live; `coeffs` must point to 6 writable doubles.
 */
enum HvStatus hv_quintic_coefficients(const struct HvQuintic *q, double *coeffs);

/*
 # Safety
 `q` must be null or a handle from [`hv_quintic_new`] not yet freed.
 */
void hv_quintic_free(struct HvQuintic *q);

/*
 Run one full picking cycle against `target`.

 A cycle that fails part-way still fills `out` and returns `HV_STATUS_OK`
 with `completed = 0`; only invalid arguments produce an error status.

 # Safety
 `cfg` must be null or live; `out` must be writable.
 */
enum HvStatus hv_run_harvest_cycle(const struct HvConfig *cfg,
                                   struct HvPoint target,
                                   enum HvController controller,
                                   uint64_t seed,
                                   struct HvTrialResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HARVEST_H */
