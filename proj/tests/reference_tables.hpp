#pragma once

#include <vector>

// Reference largest eigenvalues lambda(L, N) and the straight-line fits
// derived from them.
namespace backflow::reference {

struct LengthTable {
  double half_width;
  std::vector<int> half_counts;
  std::vector<double> lambdas;
  double intercept;
  double slope;
  double sigma;
};

inline std::vector<int> counts(int first, int step, int n) {
  std::vector<int> out;
  for (int j = 0; j < n; ++j) out.push_back(first + step * j);
  return out;
}

inline const std::vector<LengthTable>& length_tables() {
  static const std::vector<LengthTable> tables{
      {10.0, counts(100, 100, 10),
       {0.1089941477648881, 0.1139918526091255, 0.1156769692627627, 0.1165224285063283,
        0.1170305983268448, 0.1173697450068959, 0.1176121707518563, 0.1177940869441254,
        0.1179356345180387, 0.1180489085192777},
       0.1190457811547612, -1.006541101888894, 5.561804879449029e-6},
      {15.0, counts(150, 150, 10),
       {0.1119434239699512, 0.1169883703222082, 0.1186785116904098, 0.1195264258732301,
        0.1200361158663618, 0.1203763059276854, 0.1206194942121110, 0.1208019926220471,
        0.1209439994908275, 0.1210576451546305},
       0.1220638424358060, -1.519279315595413, 3.375966537451888e-6},
      {20.0, counts(400, 200, 10),
       {0.1184799591245791, 0.1201715170800806, 0.1210211077144216, 0.1215320463086800,
        0.1218731553662990, 0.1221170385559465, 0.1223000778432970, 0.1224425165250773,
        0.1225565144042943, 0.1226498163346949},
       0.1235739992757623, -2.039355860145372, 1.794581838275372e-6},
      {25.0, counts(500, 250, 10),
       {0.1193720192594545, 0.1210700920114530, 0.1219223352025476, 0.1224346215338796,
        0.1227765382427701, 0.1230209570947946, 0.1232043766828351, 0.1233470988716490,
        0.1234613160028462, 0.1235547924141025},
       0.1244822862467697, -2.556926934667362, 1.477042007656790e-6},
      {30.0, counts(600, 300, 10),
       {0.1199705773485895, 0.1216727154735607, 0.1225237102038637, 0.1230354498337929,
        0.1233770750757993, 0.1236213172702387, 0.1238046200925763, 0.1239472601723789,
        0.1240614168298270, 0.1241548470766964},
       0.1250829195703286, -3.068533796622797, 9.338351587060546e-7},
      {35.0, counts(800, 400, 10),
       {0.1210457163111231, 0.1225236257266571, 0.1232707319394567, 0.1237196617010170,
        0.1240192405176445, 0.1242333716554072, 0.1243940508807573, 0.1245190718418926,
        0.1246191191181317, 0.1247009962047494},
       0.1255108771862945, -3.577085710064331, 2.433955824900637e-6},
      {40.0, counts(1200, 600, 8),
       {0.1224211080034019, 0.1235567482529446, 0.1241265265788500, 0.1244689068130608,
        0.1246973635442337, 0.1248606442986848, 0.1249831574822948, 0.1250784764658047},
       0.1258365731314665, -4.100558963340225, 1.017018984296298e-6},
  };
  return tables;
}

// Weighted fit of the seven intercepts against 1/L.
inline constexpr double kSupDelta = 0.1280997589328653;
inline constexpr double kSupDeltaSlope = -9.050752023369246e-2;
inline constexpr double kSupDeltaSigma = 1.995873910685532e-6;

// Quoted values at the ansatz optima.
inline constexpr double kPiecewiseDelta = 0.0624188;
inline const std::vector<double> kPiecewiseParams{0.1654, 0.5641, 1.265, 0.03529, 0.6365};
inline constexpr double kTwoGaussianDelta = 0.012011;
inline const std::vector<double> kTwoGaussianParams{28.95, 0.8479, 83.28, 0.1637, 1.271,
                                                    3.141592653589793};
inline constexpr double kPhysicalDeltaQb = 0.0106;
inline const std::vector<double> kPhysicalParams{1.8, 1.0, 1.6, 1.0, 5.7, 0.152246, 0.246813};

inline constexpr double kBrackenMelloy = 0.0384506;

}  // namespace backflow::reference
