import pytest

from kitscan.errors import MalformedMatrix
from kitscan.evasion import EvasionReport, EvasionTechnique as E
from kitscan.features import (
    COUNT_FEATURES,
    FEATURE_NAMES,
    MATRIX_COLUMNS,
    FeatureVector,
    LabeledSample,
    Labels,
    export_matrix,
    extract_features,
    label_kit,
    read_matrix,
)
from kitscan.obfuscation import ObfuscationReport, ObfuscationTechnique as O
from kitscan.php_lexer import analyze_php


def feats(kit):
    return extract_features(kit, analyze_php(kit)).as_dict()


def test_feature_order():
    assert len(FEATURE_NAMES) == 43
    assert FEATURE_NAMES[:3] == ("nFiles", "nDir", "nPhp")
    assert FEATURE_NAMES[13:17] == ("htaccess", "robots_txt", "admin", "config")
    assert FEATURE_NAMES[32:40] == ("$_SERVER", "$_GET", "$_POST", "$_FILES", "$_REQUEST", "$_SESSION",
                                    "$_ENV", "$_COOKIE")
    assert FEATURE_NAMES[-3:] == ("mail", "bot_telegram", "write")


def test_counting_example(make_kit):
    f = feats(make_kit({"a.php": "<?php", "b.js": "", "sub/c.html": ""}))
    assert (f["nFiles"], f["nDir"], f["nPhp"], f["nJs"], f["nHtml"]) == (3, 1, 1, 1, 1)
    assert all(f[n] == 0 for n in FEATURE_NAMES if n not in ("nFiles", "nDir", "nPhp", "nJs", "nHtml"))


def test_nfiles_is_sum_of_kinds(make_kit):
    kit = make_kit({"a.php": "", "b.png": b"", "c.pdf": b"", "d.exe": b"", "e": b"", "f.css": "", "g.txt": ""})
    f = feats(kit)
    assert f["nFiles"] == sum(f[n] for n in COUNT_FEATURES[2:])


def test_marker_rules(make_kit):
    assert feats(make_kit({"wp-content/x.css": ""}))["wordpress"] == 1
    assert feats(make_kit({"a.js": "send('https://api.telegram.org/bot123/sendMessage')"}))["bot_telegram"] == 1
    f = feats(make_kit({"Admin/x.php": "", "inc/MyConfig.php": ""}))
    assert f["admin"] == 1 and f["config"] == 1
    assert feats(make_kit({"administrator/x.php": ""}))["admin"] == 0
    assert feats(make_kit({"index.html": "<!-- Mirrored from x by HTTrack Website Copier -->"}))["httrack"] == 1
    assert feats(make_kit({"artisan": ""}))["laravel"] == 1
    assert feats(make_kit({"system/core/a.php": ""}))["code_ign"] == 1
    assert feats(make_kit({"Zend/a.php": ""}))["zend"] == 1
    assert feats(make_kit({"paypal/index.php": ""}))["deceiving_url"] == 1
    assert feats(make_kit({"x.php": ""}, kit_id="k", origin_name="Chase-Login.zip"))["deceiving_zipname"] == 1


def test_php_function_rules(php_bundle):
    def f(src):
        kit, b = php_bundle(src)
        return extract_features(kit, b).as_dict()

    assert f('<?php $c = curl_init("x");')["api_call"] == 1
    assert f('<?php file_get_contents("https://x.example/");')["api_call"] == 1
    assert f('<?php file_get_contents("local.txt");')["api_call"] == 0
    assert f('<?php $a = ["1.2.3.4"];')["array_ipaddresses"] == 1
    assert f('<?php $a = ["x.example.com"];')["array_hostnames"] == 1
    assert f("<?php if (filter_var($_POST['e'], FILTER_VALIDATE_EMAIL)) {}")["form_validation"] == 1
    assert f("<?php filter_var($e, FILTER_VALIDATE_EMAIL);")["form_validation"] == 0
    assert f('<?php $h = fopen("a.txt", "r");')["read_file"] == 1
    r = f('<?php $h = fopen("a.txt", "a");')
    assert r["write"] == 1 and r["read_file"] == 0
    assert f('<?php header("Location: next.php");')["redirection"] == 1
    assert f('<?php fopen(md5(rand()) . ".txt", "w");')["random_file"] == 1
    assert f('<?php fopen("a.txt", "w"); $r = rand();')["random_file"] == 0
    assert f("<?php mkdir(uniqid());")["random_dir"] == 1
    assert f("<?php mail($to, $s, $m);")["mail"] == 1
    assert f("<?php $x = $_SESSION['a'] . $_COOKIE['b'];")["$_SESSION"] == 1


def _reports(ev=(), ob=()):
    e = EvasionReport({t: t in ev for t in E}, ())
    o = ObfuscationReport({t: t in ob for t in O}, ())
    return e, o


def test_label_kit():
    assert label_kit(*_reports()) == Labels()
    lab = label_kit(*_reports(ev=[E.ROBOTS_TXT]))
    assert lab.evasive and lab.evasion_techniques == {E.ROBOTS_TXT} and not lab.obfuscated
    lab = label_kit(*_reports(ob=[O.EVAL, O.HEX]))
    assert lab.obfuscated and len(lab.obfuscation_techniques) == 2


def _sample(kit_id, flag=1, labels=Labels()):
    return LabeledSample(kit_id, FeatureVector(tuple([flag] * 43)), labels)


def test_export_matrix(tmp_path):
    samples = [_sample("b", labels=Labels(frozenset({E.PHP}))), _sample("a", flag=0)]
    out = export_matrix(samples, tmp_path / "m.csv")
    text = out.read_text()
    lines = text.split("\n")
    assert len(lines) == 4 and lines[-1] == ""
    assert lines[0].split(",") == list(MATRIX_COLUMNS)
    assert lines[1].startswith("a,0,") and lines[2].startswith("b,1,")
    b = lines[2].split(",")
    assert b[44:46] == ["1", "0"] and b[46:] == ["0", "0", "1", "0", "0", "0", "0", "0"]
    again = export_matrix(list(reversed(samples)), tmp_path / "m2.csv")
    assert again.read_bytes() == out.read_bytes()
    back = read_matrix(out)
    assert [s.kit_id for s in back] == ["a", "b"] and back[1].labels == samples[0].labels


def test_export_requires_samples(tmp_path):
    with pytest.raises(ValueError):
        export_matrix([], tmp_path / "m.csv")


@pytest.mark.parametrize(
    "mutate",
    [
        lambda lines: lines[:1] + [lines[1] + ",9"],
        lambda lines: [lines[0].replace("nFiles", "nfiles")] + lines[1:],
        lambda lines: [lines[0], lines[1].replace("a,0,", "a,x,", 1)],
        lambda lines: [lines[0], lines[1], lines[1]],
        lambda lines: [],
    ],
)
def test_read_matrix_malformed(tmp_path, mutate):
    path = export_matrix([_sample("a", flag=0)], tmp_path / "m.csv")
    lines = path.read_text().splitlines()
    path.write_text("\n".join(mutate(lines)) + "\n")
    with pytest.raises(MalformedMatrix):
        read_matrix(path)
