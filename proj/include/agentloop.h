/* agentloop C API: batch engine for multi-turn generate-judge-reflect
 * episodes, group-relative policy training, and cold-start corpus
 * construction against simulated or HTTP backends.
 *
 * All functions return al_status; AL_OK is 0. On failure, al_last_error()
 * returns a thread-local message describing the most recent error in the
 * calling thread. Strings returned through char** out-parameters are owned
 * by the caller and must be released with al_string_free().
 */
#ifndef AGENTLOOP_H
#define AGENTLOOP_H

#ifdef __cplusplus
extern "C" {
#endif

typedef struct al_engine al_engine;

typedef enum al_status {
    AL_OK = 0,
    AL_ERR_INVALID_ARGUMENT = 1,
    AL_ERR_CONFIG = 2,
    AL_ERR_BACKEND = 3,
    AL_ERR_IO = 4,
    AL_ERR_INTERNAL = 5
} al_status;

const char* al_version(void);

/* Message for the most recent failure in this thread; never NULL. */
const char* al_last_error(void);

/* config_json is the run configuration document (see README). */
al_status al_engine_create(const char* config_json, al_engine** out_engine);
void al_engine_destroy(al_engine* engine);

/* out_dir NULL selects the configured output directory. Summary documents
 * are JSON; pass NULL to skip them. */
al_status al_engine_run(al_engine* engine, const char* queries_path, const char* out_dir,
                        char** out_summary_json);
al_status al_engine_train(al_engine* engine, const char* out_dir, char** out_summary_json);
al_status al_engine_build_sft(al_engine* engine, const char* pool_path, const char* out_dir,
                              char** out_summary_json);
al_status al_engine_validate_corpus(al_engine* engine, const char* corpus_path,
                                    char** out_report_json);

/* Diagnostics need no engine configuration. */
al_status al_diagnose(const char* trajectories_path, char** out_report_json);

void al_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* AGENTLOOP_H */
