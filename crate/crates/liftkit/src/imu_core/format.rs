//! Text formats for recordings and labels.
//!
//! Recording file: UTF-8, header lines `#key=value` (subject, trial,
//! start_epoch_ms, rate_hz, sensors, units), then one comma-separated row of
//! 6×|sensors| decimal values per frame. The units header declares the source
//! units (`m/s2` or `g`; `rad/s` or `deg/s`) and values are converted to
//! m/s² / rad/s on load. Serialization always emits canonical units with
//! 9 significant digits, which round-trips bit-for-bit through a reparse.
//!
//! Label file: rows `trial_id,bol_hh:MM:ss.mmm[,eol_hh:MM:ss.mmm],source`.

use super::*;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AccelUnit {
    MetersPerS2,
    G,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GyroUnit {
    RadPerS,
    DegPerS,
}

pub fn parse_recording(text: &str) -> Result<Recording> {
    let mut subject = None;
    let mut trial = None;
    let mut start_epoch_ms = None;
    let mut rate_hz = None;
    let mut sensors: Option<Vec<SensorId>> = None;
    let mut units = None;
    let mut frames = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = lineno + 1;
        if let Some(rest) = line.strip_prefix('#') {
            let (key, value) = rest
                .split_once('=')
                .ok_or_else(|| ImuError::Parse(format!("malformed header line {row}: '{line}'")))?;
            match key.trim() {
                "subject" => subject = Some(value.trim().to_string()),
                "trial" => trial = Some(value.trim().to_string()),
                "start_epoch_ms" => {
                    start_epoch_ms = Some(value.trim().parse::<i64>().map_err(|_| {
                        ImuError::Parse(format!("bad start_epoch_ms '{value}' at line {row}"))
                    })?)
                }
                "rate_hz" => {
                    let r: f64 = value.trim().parse().map_err(|_| {
                        ImuError::Parse(format!("bad rate_hz '{value}' at line {row}"))
                    })?;
                    if !(r > 0.0) {
                        return Err(ImuError::Schema("rate_hz must be positive".into()));
                    }
                    rate_hz = Some(r);
                }
                "sensors" => {
                    let parsed: Result<Vec<SensorId>> = value
                        .split(',')
                        .map(|s| {
                            SensorId::parse(s.trim()).ok_or_else(|| {
                                ImuError::Parse(format!("unknown sensor '{}' at line {row}", s.trim()))
                            })
                        })
                        .collect();
                    sensors = Some(parsed?);
                }
                "units" => {
                    let (a, g) = value.split_once(',').ok_or_else(|| {
                        ImuError::Parse(format!("units header needs accel,gyro at line {row}"))
                    })?;
                    let accel = match a.trim() {
                        "m/s2" => AccelUnit::MetersPerS2,
                        "g" => AccelUnit::G,
                        other => {
                            return Err(ImuError::Parse(format!("unknown accel unit '{other}'")))
                        }
                    };
                    let gyro = match g.trim() {
                        "rad/s" => GyroUnit::RadPerS,
                        "deg/s" => GyroUnit::DegPerS,
                        other => return Err(ImuError::Parse(format!("unknown gyro unit '{other}'"))),
                    };
                    units = Some((accel, gyro));
                }
                other => return Err(ImuError::Parse(format!("unknown header key '{other}'"))),
            }
        } else {
            let n_expected = sensors
                .as_ref()
                .ok_or_else(|| ImuError::Parse("frame row before sensors header".into()))?
                .len()
                * CHANNELS_PER_SENSOR;
            let mut channels = Vec::with_capacity(n_expected);
            for field in line.split(',') {
                let v: f64 = field.trim().parse().map_err(|_| ImuError::ParseAt {
                    line: row,
                    msg: format!("non-numeric channel value '{}'", field.trim()),
                })?;
                channels.push(v);
            }
            if channels.len() != n_expected {
                return Err(ImuError::Schema(format!(
                    "row at line {row} carries {} values, schema expects {n_expected}",
                    channels.len()
                )));
            }
            frames.push(Frame { channels });
        }
    }

    if frames.is_empty() {
        return Err(ImuError::Parse("no frames".into()));
    }
    let (accel_unit, gyro_unit) =
        units.ok_or_else(|| ImuError::Parse("missing units header".into()))?;
    let active_sensors = sensors.ok_or_else(|| ImuError::Parse("missing sensors header".into()))?;

    if accel_unit == AccelUnit::G || gyro_unit == GyroUnit::DegPerS {
        for frame in &mut frames {
            for (i, v) in frame.channels.iter_mut().enumerate() {
                let is_accel = i % CHANNELS_PER_SENSOR < 3;
                if is_accel && accel_unit == AccelUnit::G {
                    *v *= crate::GRAVITY;
                } else if !is_accel && gyro_unit == GyroUnit::DegPerS {
                    *v *= PI / 180.0;
                }
            }
        }
    }

    let rec = Recording {
        subject_id: subject.ok_or_else(|| ImuError::Parse("missing subject header".into()))?,
        trial_id: trial.ok_or_else(|| ImuError::Parse("missing trial header".into()))?,
        start_epoch_ms: start_epoch_ms
            .ok_or_else(|| ImuError::Parse("missing start_epoch_ms header".into()))?,
        sample_rate_hz: rate_hz.ok_or_else(|| ImuError::Parse("missing rate_hz header".into()))?,
        active_sensors,
        frames,
    };
    rec.validate()?;
    Ok(rec)
}

pub fn serialize_recording(rec: &Recording) -> String {
    let mut out = String::new();
    out.push_str(&format!("#subject={}\n", rec.subject_id));
    out.push_str(&format!("#trial={}\n", rec.trial_id));
    out.push_str(&format!("#start_epoch_ms={}\n", rec.start_epoch_ms));
    out.push_str(&format!("#rate_hz={}\n", rec.sample_rate_hz));
    let names: Vec<&str> = rec.active_sensors.iter().map(|s| s.name()).collect();
    out.push_str(&format!("#sensors={}\n", names.join(",")));
    out.push_str("#units=m/s2,rad/s\n");
    for frame in &rec.frames {
        let row: Vec<String> = frame.channels.iter().map(|v| format!("{v:.8e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn parse_time_of_day(s: &str, row: usize) -> Result<i64> {
    let err = || ImuError::ParseAt { line: row, msg: format!("bad time of day '{s}'") };
    let mut parts = s.split(':');
    let h: i64 = parts.next().ok_or_else(err)?.parse().map_err(|_| err())?;
    let m: i64 = parts.next().ok_or_else(err)?.parse().map_err(|_| err())?;
    let sec_ms = parts.next().ok_or_else(err)?;
    if parts.next().is_some() {
        return Err(err());
    }
    let (sec, ms) = sec_ms.split_once('.').ok_or_else(err)?;
    let sec: i64 = sec.parse().map_err(|_| err())?;
    if ms.len() != 3 {
        return Err(err());
    }
    let ms: i64 = ms.parse().map_err(|_| err())?;
    if h >= 24 || m >= 60 || sec >= 60 {
        return Err(err());
    }
    Ok(((h * 60 + m) * 60 + sec) * 1000 + ms)
}

fn format_time_of_day(ms_of_day: i64) -> String {
    let ms = ms_of_day % 1000;
    let s = ms_of_day / 1000 % 60;
    let m = ms_of_day / 60_000 % 60;
    let h = ms_of_day / 3_600_000;
    format!("{h:02}:{m:02}:{s:02}.{ms:03}")
}

pub fn parse_labels(text: &str) -> Result<Vec<RawLabel>> {
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = lineno + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(ImuError::ParseAt {
                line: row,
                msg: format!("label row has {} fields, expected 3 or 4", fields.len()),
            });
        }
        let bol = parse_time_of_day(fields[1], row)?;
        let eol = if fields.len() == 4 { Some(parse_time_of_day(fields[2], row)?) } else { None };
        if let Some(eol) = eol {
            if eol <= bol {
                return Err(ImuError::ParseAt {
                    line: row,
                    msg: "eol time must be after bol time".into(),
                });
            }
        }
        let source = match *fields.last().unwrap() {
            "MoCap" => LabelSource::MoCap,
            "Video" => LabelSource::Video,
            other => {
                return Err(ImuError::ParseAt {
                    line: row,
                    msg: format!("unknown label source '{other}'"),
                })
            }
        };
        labels.push(RawLabel {
            trial_id: fields[0].to_string(),
            bol_ms_of_day: bol,
            eol_ms_of_day: eol,
            source,
        });
    }
    Ok(labels)
}

pub fn serialize_labels(labels: &[RawLabel]) -> String {
    let mut out = String::new();
    for label in labels {
        let source = match label.source {
            LabelSource::MoCap => "MoCap",
            LabelSource::Video => "Video",
        };
        match label.eol_ms_of_day {
            Some(eol) => out.push_str(&format!(
                "{},{},{},{}\n",
                label.trial_id,
                format_time_of_day(label.bol_ms_of_day),
                format_time_of_day(eol),
                source
            )),
            None => out.push_str(&format!(
                "{},{},{}\n",
                label.trial_id,
                format_time_of_day(label.bol_ms_of_day),
                source
            )),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIX_SENSORS: &str =
        "left_wrist,right_wrist,right_thigh,upper_back,right_upper_arm,waist";

    fn header(sensors: &str, units: &str) -> String {
        format!(
            "#subject=s01\n#trial=t01\n#start_epoch_ms=1700000000000\n#rate_hz=25\n#sensors={sensors}\n#units={units}\n"
        )
    }

    fn row(n: usize, v: f64) -> String {
        vec![format!("{v}"); n].join(",")
    }

    #[test]
    fn parses_two_frame_file() {
        let text = format!("{}{}\n{}\n", header(SIX_SENSORS, "m/s2,rad/s"), row(36, 1.5), row(36, -2.0));
        let rec = parse_recording(&text).unwrap();
        assert_eq!(rec.len(), 2);
        assert_eq!(rec.n_channels(), 36);
        assert_eq!(rec.frames[0].channels[0], 1.5);
        assert_eq!(rec.sample_rate_hz, 25.0);
    }

    #[test]
    fn rejects_wrong_column_count() {
        let five = "left_wrist,right_wrist,right_thigh,upper_back,right_upper_arm";
        let text = format!("{}{}\n", header(five, "m/s2,rad/s"), row(36, 0.0));
        assert!(matches!(parse_recording(&text), Err(ImuError::Schema(_))));
    }

    #[test]
    fn rejects_empty_frame_section() {
        let text = header(SIX_SENSORS, "m/s2,rad/s");
        match parse_recording(&text) {
            Err(ImuError::Parse(msg)) => assert_eq!(msg, "no frames"),
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn reports_row_number_for_bad_value() {
        let text = format!("{}{}\n", header(SIX_SENSORS, "m/s2,rad/s"), row(35, 0.0) + ",abc");
        match parse_recording(&text) {
            Err(ImuError::ParseAt { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected ParseAt, got {other:?}"),
        }
    }

    #[test]
    fn converts_declared_units() {
        let text = format!("{}{}\n", header(SIX_SENSORS, "g,deg/s"), row(36, 1.0));
        let rec = parse_recording(&text).unwrap();
        assert!((rec.frames[0].channels[0] - 9.81).abs() < 1e-12); // accel in g
        assert!((rec.frames[0].channels[3] - PI / 180.0).abs() < 1e-15); // gyro in deg/s
    }

    #[test]
    fn serialize_reparse_is_identity_at_9_digits() {
        let text = format!(
            "{}{}\n",
            header(SIX_SENSORS, "m/s2,rad/s"),
            vec!["1.23456789e0"; 36].join(",")
        );
        let rec = parse_recording(&text).unwrap();
        let ser = serialize_recording(&rec);
        let rec2 = parse_recording(&ser).unwrap();
        assert_eq!(rec, rec2);
        assert_eq!(ser, serialize_recording(&rec2));
    }

    #[test]
    fn label_roundtrip() {
        let text = "t01,10:00:04.000,10:00:05.520,MoCap\nt02,11:30:00.250,Video\n";
        let labels = parse_labels(text).unwrap();
        assert_eq!(labels.len(), 2);
        assert_eq!(labels[0].bol_ms_of_day, 36_004_000);
        assert_eq!(labels[0].eol_ms_of_day, Some(36_005_520));
        assert_eq!(labels[1].eol_ms_of_day, None);
        assert_eq!(serialize_labels(&labels), text);
    }

    #[test]
    fn label_eol_before_bol_rejected() {
        let text = "t01,10:00:04.000,10:00:03.000,MoCap\n";
        assert!(parse_labels(text).is_err());
    }
}
