#include <stdio.h>
#include <string.h>

#include "failspec.h"

#define CHECK(cond)                                                  \
  do {                                                               \
    if (!(cond)) {                                                   \
      const char *msg = fs_last_error_message();                     \
      fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond,         \
              msg ? msg : "no error");                               \
      return 1;                                                      \
    }                                                                \
  } while (0)

int main(void) {
  fs_system *sys = NULL;
  CHECK(fs_system_unrotated_toric(2, 2, &sys) == FS_STATUS_OK);
  CHECK(fs_system_num_faults(sys) == 8);

  fs_decoder *dec = NULL;
  CHECK(fs_decoder_new(sys, FS_BACKEND_LOOKUP, &dec) == FS_STATUS_OK);

  uint8_t error[8] = {0};
  bool fails = true;
  CHECK(fs_decoder_is_failure(dec, error, 8, &fails) == FS_STATUS_OK);
  CHECK(!fails);
  CHECK(fs_decoder_is_failure(dec, error, 7, &fails) == FS_STATUS_DIMENSION);
  CHECK(fs_last_error_message() != NULL);

  char *text = NULL;
  CHECK(fs_system_to_text(sys, &text) == FS_STATUS_OK);
  fs_system *copy = NULL;
  CHECK(fs_system_parse(text, &copy) == FS_STATUS_OK);
  CHECK(fs_system_expanded_count(copy) == 8);

  double f[3] = {0.0, 0.5, 1.0};
  double p = 0.0;
  CHECK(fs_transform(f, 3, 0.5, &p) == FS_STATUS_OK);
  CHECK(p > 0.5 - 1e-12 && p < 0.5 + 1e-12);

  fs_string_free(text);
  fs_system_free(copy);
  fs_decoder_free(dec);
  fs_system_free(sys);
  puts("ok");
  return 0;
}
