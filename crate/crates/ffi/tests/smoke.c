#include <math.h>
#include <stdio.h>
#include <string.h>

#include "ifc_swipt.h"

#define CHECK(call)                                                          \
  do {                                                                       \
    IfcStatus s_ = (call);                                                   \
    if (s_ != IFC_STATUS_OK) {                                               \
      fprintf(stderr, "%s -> %s: %s\n", #call, ifc_status_name(s_),          \
              ifc_last_error() ? ifc_last_error() : "");                     \
      return 1;                                                              \
    }                                                                        \
  } while (0)

int main(void) {
  const double alpha[4] = {1.0, 0.8, 0.8, 1.0};
  IfcChannelSet *cs = NULL;
  CHECK(ifc_channel_draw(4, 4, alpha, 1, &cs));

  char digest[IFC_DIGEST_LEN];
  CHECK(ifc_channel_digest(cs, digest, sizeof digest));
  if (strlen(digest) != 64) return 2;

  char small[8];
  if (ifc_channel_digest(cs, small, sizeof small) != IFC_STATUS_BUFFER_TOO_SMALL) return 3;

  double emax = 0.0;
  CHECK(ifc_emax(cs, IFC_STRATEGY_MEB, 50.0, &emax));
  if (!(emax > 0.0)) return 4;

  IfcBoundary *b = NULL;
  CHECK(ifc_sweep(cs, IFC_STRATEGY_MEB, 50.0, 16, &b));
  size_t n = ifc_boundary_len(b);
  if (n + ifc_boundary_gap_count(b) != 16) return 5;

  IfcPoint first, last;
  CHECK(ifc_boundary_point(b, 0, &first));
  CHECK(ifc_boundary_point(b, n - 1, &last));
  if (first.e_bar != 0.0 || !(first.rate_bits >= last.rate_bits)) return 6;
  if (ifc_boundary_point(b, n, &last) != IFC_STATUS_OUT_OF_RANGE) return 7;

  double area = 0.0;
  CHECK(ifc_boundary_area(b, &area));
  if (!(area > 0.0)) return 8;

  IfcMode mode;
  CHECK(ifc_select_mode(cs, 0.5 * emax, 50.0, &mode));
  if (mode != IFC_MODE_EH1_ID2 && mode != IFC_MODE_ID1_EH2) return 9;

  if (ifc_channel_load("/nonexistent/channel.json", &cs) != IFC_STATUS_IO) return 10;

  ifc_boundary_free(b);
  ifc_channel_free(cs);
  ifc_channel_free(NULL);
  printf("ok %s %.6f %s\n", ifc_version(), emax, digest);
  return 0;
}
