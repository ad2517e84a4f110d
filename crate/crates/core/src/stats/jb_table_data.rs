// Generated by examples/gen_jb_table.rs; do not edit.
pub const QUANTILES: [[f64; 31]; 8] = [
    // n = 10
    [
        0.003428198639771123,
        0.01567960755770493,
        0.03053087044246118,
        0.06962179018124848,
        0.12711794017146513,
        0.2210302285654691,
        0.36206184542148956,
        0.47931453666884605,
        0.5884324832781499,
        0.6945274076845397,
        0.8073268545085144,
        0.9369791882961873,
        1.018595257476472,
        1.1212280664844012,
        1.2765467993386064,
        1.6170266417432204,
        1.947595767571579,
        2.5396142704579012,
        2.900968954394624,
        3.447359415150406,
        3.7980989240125553,
        4.250835462358731,
        4.815358559031763,
        5.675028511636275,
        6.277722648785921,
        7.243931791099633,
        8.811317565787329,
        10.75612480384995,
        12.335085237723202,
        14.682611277477845,
        15.534850522454594,
    ],
    // n = 20
    [
        0.0023227050393095014,
        0.01128533799842784,
        0.023126110618477965,
        0.0552294235794562,
        0.10642472208285066,
        0.20151717730529348,
        0.37835408965343564,
        0.536383873245545,
        0.6923805341516821,
        0.8567047590254324,
        1.0358684938450926,
        1.2506135738127713,
        1.385233107145296,
        1.5628802521291436,
        1.8266187221888754,
        2.344882370739372,
        2.8464673035762744,
        3.8010242556955127,
        4.40651335438312,
        5.3238370427152315,
        5.92557949841007,
        6.759078460342674,
        7.944520967160678,
        9.75628856134999,
        11.198569685154057,
        13.57234735989526,
        18.07942781958606,
        25.225687334100495,
        33.130855059926006,
        40.85894825458338,
        49.41623918836304,
    ],
    // n = 50
    [
        0.0018207655500271534,
        0.010109700640797414,
        0.020405841873540647,
        0.0512518287287025,
        0.10415660076945121,
        0.20602795590010411,
        0.40118135964333324,
        0.6037707600328074,
        0.8148633783976815,
        1.0510765765161816,
        1.3199038917964108,
        1.6513846513625463,
        1.859965171411647,
        2.1318183291826713,
        2.5185518481996,
        3.1883041999346005,
        3.8385808389797673,
        4.990763948754067,
        5.69035911956797,
        6.7549583001646605,
        7.518749904964623,
        8.528504483517597,
        9.802855498371189,
        12.069990773526808,
        13.798582433612715,
        16.486409571001108,
        22.469478644060324,
        33.9682966475665,
        46.23144407249225,
        59.21567858587576,
        74.88138654832738,
    ],
    // n = 100
    [
        0.002053357405883999,
        0.010687629643154173,
        0.02027527319503854,
        0.04944452316787285,
        0.0971209860612156,
        0.19745072687514,
        0.4088125411092321,
        0.6340750020840898,
        0.8796405959681267,
        1.1538628562182272,
        1.4835284868630747,
        1.893208817341387,
        2.158932373160162,
        2.4843575996068306,
        2.9323768703477806,
        3.677793570709508,
        4.309894770885553,
        5.440255165240164,
        6.209759344663595,
        7.28680788341092,
        8.024974656941906,
        9.01665823334835,
        10.392944508500904,
        12.554610679039698,
        14.270798260794104,
        17.207443186090345,
        23.108184882120675,
        32.34305359828369,
        41.988446230100514,
        58.85953520661701,
        68.24872884474844,
    ],
    // n = 250
    [
        0.0016441154804897435,
        0.009720398378115525,
        0.019790207874119694,
        0.04976353533738173,
        0.10155741261376684,
        0.20560629592655752,
        0.4264561065155008,
        0.6737036986552768,
        0.9483396572295957,
        1.265567092537421,
        1.651123220383534,
        2.1433098955751446,
        2.4574601593457883,
        2.8381337297291958,
        3.3537151458615813,
        4.144818090709928,
        4.781583486972969,
        5.774818703780923,
        6.352989034609512,
        7.293618744330181,
        7.915521845724219,
        8.674538239416105,
        9.830139986571332,
        11.546464490046025,
        12.869351499290781,
        15.080771568897095,
        18.932988773538245,
        24.419382087074954,
        31.177270889158834,
        40.62602322897525,
        50.680823328583806,
    ],
    // n = 500
    [
        0.002058443858906623,
        0.009764864028253007,
        0.019731104768546837,
        0.04743886976560588,
        0.09941444953002362,
        0.20483588818622175,
        0.43236240878236437,
        0.6847228625875285,
        0.9757930047138017,
        1.31440943697288,
        1.7241226948389494,
        2.2469781314763604,
        2.5805980043059833,
        2.9954789693058035,
        3.530304943412335,
        4.322605364540032,
        4.943644616530042,
        5.858897073712766,
        6.397873469789044,
        7.194354134537163,
        7.665861080817955,
        8.359656471793807,
        9.202852007442763,
        10.684216049582268,
        11.848402797965441,
        13.663895497913867,
        16.378073101649818,
        21.089031264481658,
        25.89960930278947,
        35.373110862841024,
        40.13249570699394,
    ],
    // n = 1000
    [
        0.002054566029236324,
        0.00946419136879687,
        0.01949265158404412,
        0.04978184093268155,
        0.1003609156935779,
        0.20804348864079525,
        0.433656020694059,
        0.6923945973461739,
        0.9873865652077949,
        1.3424433471060446,
        1.7638994462377455,
        2.3143704062139077,
        2.6607101710894563,
        3.097534894068197,
        3.6448826152021345,
        4.454748034141092,
        5.050045983682075,
        5.945836763506421,
        6.428466771376765,
        7.069264119176964,
        7.525626865175795,
        8.154771576723267,
        8.919688274760903,
        10.092861331491473,
        10.951571900862039,
        12.291666550066894,
        14.986645470341111,
        18.906105286149966,
        22.613355235544716,
        27.744640747730674,
        33.82878415855746,
    ],
    // n = 2000
    [
        0.0019629291494529717,
        0.010040883240229496,
        0.020272841107255003,
        0.05057229607839992,
        0.1007825574852241,
        0.2049332161380919,
        0.43914285571307027,
        0.7066249870140411,
        1.0070060795103049,
        1.363423425998599,
        1.7951250232994447,
        2.3624627063511534,
        2.709896627033026,
        3.1427258123655015,
        3.70308809686234,
        4.528366505086899,
        5.107671339138011,
        5.988847509098599,
        6.444281218211215,
        7.087939690022624,
        7.494530466483567,
        7.991978370244482,
        8.674849535828129,
        9.698802517468323,
        10.46840965763175,
        11.575009575233898,
        13.525285783999339,
        16.661853792185408,
        20.020506067299873,
        23.557123521115397,
        26.468322403626583,
    ],
];
