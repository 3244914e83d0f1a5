#ifndef GISTKIT_GISTKIT_H
#define GISTKIT_GISTKIT_H

/* C interface to the gistkit library.
 *
 * Every function returns a gk_status. On failure gk_last_error() holds a
 * message for the calling thread until its next gk_* call. Strings returned
 * through char** out-parameters are owned by the caller and released with
 * gk_string_free(). Structured inputs and outputs are JSON text. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GK_API __declspec(dllexport)
#else
#define GK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gk_status {
  GK_OK = 0,
  GK_CONTRACT_VIOLATION = 1,
  GK_EMPTY_HISTORY = 2,
  GK_GATEWAY = 3,
  GK_PROTOCOL = 4,
  GK_JUDGE_PARSE = 5,
  GK_LOAD = 6,
  GK_INTEGRITY = 7,
  GK_EMPTY_CORPUS = 8,
  GK_IO = 9,
  GK_NOT_IMPLEMENTED = 10,
  GK_RUN_FAILED = 11,
  GK_INVALID_ARGUMENT = 20,
  GK_INTERNAL = 99
} gk_status;

typedef struct gk_gateway gk_gateway;
typedef struct gk_corpus gk_corpus;
typedef struct gk_report gk_report;
typedef struct gk_reference gk_reference;

GK_API const char* gk_version(void);
GK_API const char* gk_last_error(void);
GK_API const char* gk_status_name(gk_status status);
GK_API void gk_string_free(char* text);

/* --- gateway ------------------------------------------------------------- */

/* backend: "mock" or "remote". options_json may be NULL or an object with
 * cache_dir, max_attempts, base_delay_ms and, for the mock backend,
 * overrides: [{"needle": ..., "reply": ...}]. */
GK_API gk_status gk_gateway_create(const char* backend, const char* options_json, gk_gateway** out);
GK_API void gk_gateway_free(gk_gateway* gateway);
GK_API gk_status gk_gateway_provider_calls(const gk_gateway* gateway, uint64_t* out);

/* --- corpora ------------------------------------------------------------- */

/* expected_task may be NULL. */
GK_API gk_status gk_corpus_load(const char* path, const char* expected_task, gk_corpus** out);
GK_API void gk_corpus_free(gk_corpus* corpus);
/* {"name", "task", "split", "instance_count", "content_hash"} */
GK_API gk_status gk_corpus_manifest(const gk_corpus* corpus, char** out_json);
/* GK_OK when the file is valid; otherwise GK_LOAD with a JSON array of
 * problems in out_json. */
GK_API gk_status gk_corpus_validate_file(const char* path, char** out_json);
/* column may be NULL ("value"). */
GK_API gk_status gk_corpus_stats_csv(const gk_corpus* corpus, const char* column, char** out_csv);
GK_API gk_status gk_corpus_stats_json(const gk_corpus* corpus, char** out_json);

/* Builds PSW corpora from the Semantic Scholar API (S2_API_KEY, S2_BASE_URL).
 * options_json: query, out_dir, name, min_year, max_papers, history_limit,
 * seed, ratios [train, valid, test]. Result: files, private_map_path,
 * skipped, failures, papers. */
GK_API gk_status gk_dataset_build_psw(const char* options_json, char** out_json);

/* --- runs ---------------------------------------------------------------- */

/* GK_OK, or GK_CONTRACT_VIOLATION with a JSON array of problems. */
GK_API gk_status gk_validate_config(const char* task, const char* config_json, char** out_json);
/* config_json holds RunConfig fields (setting, ablation, seed, k_retrieve,
 * model_id, ...); NULL uses defaults. reference may be NULL. A run whose
 * error fraction exceeds the threshold still returns GK_OK; check
 * gk_report_failed(). */
GK_API gk_status gk_run(const gk_corpus* corpus, gk_gateway* gateway, const char* config_json,
                        const gk_reference* reference, gk_report** out);
/* Profiles every corpus user. Output: JSON array of {profile, warnings}. */
GK_API gk_status gk_gist_corpus(const gk_corpus* corpus, gk_gateway* gateway, const char* config_json,
                                int refresh, char** out_json);

GK_API void gk_report_free(gk_report* report);
GK_API int gk_report_failed(const gk_report* report);
GK_API gk_status gk_report_json(const gk_report* report, char** out_json);
GK_API gk_status gk_report_text(const gk_report* report, char** out_text);
GK_API gk_status gk_report_csv(const gk_report* report, char** out_csv);
/* <root>/<task>/<setting>/<ablation>/<timestamp>, suffixed when taken. */
GK_API gk_status gk_report_default_dir(const gk_report* report, const char* root, char** out_dir);
/* Writes report.json, report.txt, metrics.csv and run_meta.json. */
GK_API gk_status gk_report_write(const gk_report* report, const char* dir, char** out_path);
GK_API gk_status gk_report_load(const char* path, gk_report** out);

/* --- reference numbers --------------------------------------------------- */

GK_API gk_status gk_reference_load(const char* path, gk_reference** out);
GK_API void gk_reference_free(gk_reference* reference);
/* With a report: rows matching its task, setting and ablation, joined with
 * its summary. Without: every reference row, filtered by task when task is
 * not NULL. Either output pointer may be NULL. */
GK_API gk_status gk_compare(const gk_report* report, const gk_reference* reference, const char* task,
                            char** out_text, char** out_json);

/* --- prompts and judging ------------------------------------------------- */

/* binding_json: {"values": {...}, "groups": [{"label", "items": [...]}]} */
GK_API gk_status gk_render_prompt(const char* template_id, const char* binding_json, char** out_text);
/* {"consistency", "fluency", "relevance", "novelty", "warnings"} */
GK_API gk_status gk_parse_geval(const char* judge_text, char** out_json);

#ifdef __cplusplus
}
#endif

#endif /* GISTKIT_GISTKIT_H */
