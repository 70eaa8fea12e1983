/* Portrait-animation pipeline, C interface.
 *
 * Every function returns a pa_status; PA_OK (0) means success. On failure,
 * pa_last_error() returns a thread-local human-readable message that stays
 * valid until the next failing call on the same thread. Strings returned
 * through char** out-parameters are heap-allocated UTF-8 JSON documents and
 * must be released with pa_string_free().
 *
 * Configuration payloads are JSON text; the schemas are documented in
 * docs/FORMATS.md of the source distribution.
 */
#ifndef PORTANIM_H
#define PORTANIM_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pa_status {
    PA_OK = 0,
    PA_ERR_INVALID_ARGUMENT = 1, /* malformed config, bad shapes, null pointers */
    PA_ERR_IO = 2,               /* missing or unreadable/unwritable paths */
    PA_ERR_STATE = 3,            /* stage-ordering or lifecycle violations */
    PA_ERR_INTERNAL = 4
} pa_status;

/* Opaque generator handle: codec, denoising UNet, reference UNet, motion
 * encoder, context encoder and all their parameters. */
typedef struct pa_model pa_model;

const char* pa_api_version(void);
const char* pa_last_error(void);
void pa_string_free(char* s);

/* ---- model lifecycle ---- */

/* Build a fresh model from a model-config JSON object. Missing fields take
 * the toy-profile defaults; unknown fields are rejected. */
pa_status pa_model_create(const char* model_config_json, pa_model** out);

/* Rebuild the model a checkpoint directory was written by and load its
 * parameters. */
pa_status pa_model_open(const char* checkpoint_dir, pa_model** out);

void pa_model_free(pa_model* m);

/* Model config, parameter count, and latent geometry as a JSON object. */
pa_status pa_model_describe(const pa_model* m, char** json_out);

/* ---- corpus ---- */

/* Render a synthetic portrait corpus into out_dir (manifest.jsonl plus one
 * directory per video). Summary reports per-video frame counts. */
pa_status pa_synth_corpus(const char* synth_config_json, const char* out_dir,
                          char** summary_json);

/* Validate a corpus directory against a sampler config: clip counts, gaze
 * pool, mixture tags, and mask/target integrity over sampled draws. */
pa_status pa_corpus_stats(const char* corpus_dir, const char* data_config_json,
                          char** summary_json);

/* ---- training ---- */

/* Run one training stage ("stage1", "gaze_ft", "stage2") over a corpus
 * directory. run_config_json holds steps/lr/seed/schedule plus the sampler
 * config; the stage's checkpoint and train_log.jsonl are written to out_dir.
 * input_checkpoint_dir is required for gaze_ft (a stage1 checkpoint) and
 * stage2 (a gaze_ft checkpoint); pass NULL or "" for stage1. */
pa_status pa_train_stage(pa_model* m, const char* stage, const char* corpus_dir,
                         const char* run_config_json, const char* out_dir,
                         const char* input_checkpoint_dir, char** summary_json);

/* ---- inference ---- */

/* Animate a reference image with a driving video over overlapping windows.
 * The config names the reference (a corpus video dir + frame index, or a PNG
 * plus face box), the driving video dir, and the output dir; decoded frames
 * are written as PNGs plus a raw video file. */
pa_status pa_animate_video(pa_model* m, const char* animate_config_json, char** summary_json);

/* ---- invariant audit ---- */

/* Run the structural invariant suite (conditioning neutrality, temporal
 * identity, injection-site audit, freeze verification) against a model
 * config. The report lists one pass/fail entry per check; the call itself
 * fails only if the audit cannot run. */
pa_status pa_audit(const char* model_config_json, char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* PORTANIM_H */
