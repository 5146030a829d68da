#ifndef HSP_H
#define HSP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum HspStatus {
  HSP_STATUS_OK = 0,
  HSP_STATUS_NULL_POINTER = 1,
  HSP_STATUS_INVALID_ARGUMENT = 2,
  HSP_STATUS_LAYOUT = 3,
  HSP_STATUS_EPISODE_OVER = 4,
  HSP_STATUS_CHECKPOINT = 5,
  HSP_STATUS_BUFFER_TOO_SMALL = 6,
  HSP_STATUS_PANIC = 7,
} HspStatus;

/**
 * A policy instance with its own per-episode state.
 */
typedef struct HspAgent HspAgent;

/**
 * A running episode together with its accumulated per-player events.
 */
typedef struct HspGame HspGame;

/**
 * A parsed kitchen layout.
 */
typedef struct HspLayout HspLayout;

/**
 * A playable policy (scripted, tabular or parametric).
 */
typedef struct HspPolicy HspPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hsp_version(void);

/**
 * Message of the last failed call on this thread. Valid until the next
 * failing call on the same thread.
 */
const char *hsp_last_error(void);

/**
 * Loads a built-in layout by name, or a layout file by path.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HspStatus hsp_layout_load(const char *name, struct HspLayout **out);

/**
 * Parses layout text.
 *
 * # Safety
 * `text` and `name` must be NUL-terminated strings and `out` valid.
 */
enum HspStatus hsp_layout_parse(const char *text, const char *name, struct HspLayout **out);

/**
 * # Safety
 * `layout` must come from `hsp_layout_load`/`hsp_layout_parse` or be null.
 */
void hsp_layout_free(struct HspLayout *layout);

/**
 * Number of tracked event types; 0 for a null layout.
 *
 * # Safety
 * `layout` must be a live layout handle or null.
 */
size_t hsp_layout_num_events(const struct HspLayout *layout);

/**
 * Length of the per-player observation vector; 0 for a null layout.
 *
 * # Safety
 * `layout` must be a live layout handle or null.
 */
size_t hsp_layout_observation_len(const struct HspLayout *layout);

/**
 * Ticks per episode; 0 for a null layout.
 *
 * # Safety
 * `layout` must be a live layout handle or null.
 */
uint32_t hsp_layout_episode_length(const struct HspLayout *layout);

/**
 * Starts an episode. The game keeps its own reference to the layout.
 *
 * # Safety
 * `layout` must be a live layout handle and `out` valid.
 */
enum HspStatus hsp_game_new(const struct HspLayout *layout, uint64_t seed, struct HspGame **out);

/**
 * # Safety
 * `game` must come from `hsp_game_new` or be null.
 */
void hsp_game_free(struct HspGame *game);

/**
 * Advances one tick with action indices (up, down, left, right, noop,
 * interact). `reward` and `done` may be null.
 *
 * # Safety
 * `game` must be a live game handle; non-null outputs must be valid.
 */
enum HspStatus hsp_game_step(struct HspGame *game,
                             uint32_t action0,
                             uint32_t action1,
                             uint32_t *reward,
                             bool *done);

/**
 * # Safety
 * `game` must be a live game handle or null.
 */
uint32_t hsp_game_tick(const struct HspGame *game);

/**
 * Team score so far.
 *
 * # Safety
 * `game` must be a live game handle or null.
 */
uint32_t hsp_game_score(const struct HspGame *game);

/**
 * # Safety
 * `game` must be a live game handle or null.
 */
bool hsp_game_is_done(const struct HspGame *game);

/**
 * Copies the episode-summed event counts of `player` into `buf`.
 *
 * # Safety
 * `game` must be live and `buf` hold `len` writable elements.
 */
enum HspStatus hsp_game_events(const struct HspGame *game,
                               uint32_t player,
                               uint32_t *buf,
                               size_t len);

/**
 * Writes the observation of `player` into `buf`.
 *
 * # Safety
 * `game` must be live and `buf` hold `len` writable elements.
 */
enum HspStatus hsp_game_observe(const struct HspGame *game,
                                uint32_t player,
                                float *buf,
                                size_t len);

/**
 * Creates a policy from a spec: `noop`, `random`, `script:<name>` or a
 * checkpoint path.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` valid.
 */
enum HspStatus hsp_policy_load(const char *spec, struct HspPolicy **out);

/**
 * # Safety
 * `policy` must come from `hsp_policy_load` or be null.
 */
void hsp_policy_free(struct HspPolicy *policy);

/**
 * Copies the policy id into `buf`; `needed` receives the size including
 * the NUL terminator.
 *
 * # Safety
 * `policy` must be live, `buf` hold `len` bytes or be null, `needed` be
 * valid or null.
 */
enum HspStatus hsp_policy_id(const struct HspPolicy *policy, char *buf, size_t len, size_t *needed);

/**
 * Instantiates an agent seeded for seat `seat` of an episode seeded
 * `episode_seed`, matching the seeding of in-library rollouts.
 *
 * # Safety
 * `policy` must be live and `out` valid.
 */
enum HspStatus hsp_agent_new(const struct HspPolicy *policy,
                             uint64_t episode_seed,
                             uint32_t seat,
                             struct HspAgent **out);

/**
 * # Safety
 * `agent` must come from `hsp_agent_new` or be null.
 */
void hsp_agent_free(struct HspAgent *agent);

/**
 * Chooses the action index for `player` in the current game state.
 *
 * # Safety
 * `agent` and `game` must be live and `action_out` valid.
 */
enum HspStatus hsp_agent_act(struct HspAgent *agent,
                             const struct HspGame *game,
                             uint32_t player,
                             uint32_t *action_out);

/**
 * Mean and population standard deviation of the team score over seeded
 * episodes, `policy_a` in seat `position - 1`.
 *
 * # Safety
 * Handles must be live; `mean` and `std` valid.
 */
enum HspStatus hsp_crossplay(const struct HspPolicy *policy_a,
                             const struct HspPolicy *partner,
                             const struct HspLayout *layout,
                             uint8_t position,
                             size_t episodes,
                             uint64_t seed,
                             double *mean,
                             double *std);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HSP_H */
