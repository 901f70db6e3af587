mod common;

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use common::*;
use sedro::agents::{BuiltinAgent, Policy};
use sedro::client::ClientSession;
use sedro::logfile::{read_log, replay_log, write_log};
use sedro::session::SessionError;
use sedro::transport::{read_frame, Connection};
use sedro_core::protocol::{
    decode_error, decode_hello, encode_action, encode_hello, ErrorCode, Frame, FrameType, SUPPORTED_VERSIONS,
};
use sedro_core::replay::{Divergence, LogStatus};
use sedro_core::Action;

fn raw(addr: &str) -> TcpStream {
    let s = TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    s
}

fn send(s: &mut TcpStream, f: Frame) {
    s.write_all(&f.encode()).unwrap();
}

fn recv(s: &mut TcpStream) -> Frame {
    read_frame(s).unwrap().expect("frame")
}

fn err_code(f: &Frame) -> Option<ErrorCode> {
    assert_eq!(f.kind, FrameType::Err);
    ErrorCode::from_u16(decode_error(&f.payload).unwrap().0)
}

#[test]
fn handshake_picks_the_highest_mutual_version() {
    let dir = tempfile::tempdir().unwrap();
    for offered in [vec![1u16], vec![1, 2], vec![2, 1, 0]] {
        let (addr, server) = server(settings(dir.path().join("h.sdlg"), 1));
        let mut s = raw(&addr);
        send(&mut s, Frame::new(FrameType::Hello, 0, encode_hello(&offered)));
        let reply = recv(&mut s);
        assert_eq!(reply.kind, FrameType::Hello);
        assert_eq!(decode_hello(&reply.payload).unwrap(), vec![1]);
        drop(s);
        assert!(server.join().unwrap().is_err());
    }
}

#[test]
fn bad_hello_gets_an_error_then_close() {
    let dir = tempfile::tempdir().unwrap();
    let mut bad_magic = encode_hello(&[1]);
    bad_magic[..4].copy_from_slice(b"XXXX");
    let cases = [(bad_magic, ErrorCode::BadMagic), (encode_hello(&[2, 3]), ErrorCode::NoMutualVersion)];
    for (payload, code) in cases {
        let (addr, server) = server(settings(dir.path().join("bad.sdlg"), 5));
        let mut s = raw(&addr);
        send(&mut s, Frame::new(FrameType::Hello, 0, payload));
        assert_eq!(err_code(&recv(&mut s)), Some(code));
        assert!(server.join().unwrap().is_err());
        assert!(read_frame(&mut s).unwrap().is_none(), "server should close after ERR");
    }
}

#[test]
fn client_reports_both_versions_on_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (addr, server) = server(settings(dir.path().join("v.sdlg"), 5));
    let err = ClientSession::over(Connection::connect(addr.as_str()).unwrap(), &[7]).err().unwrap();
    let text = err.to_string();
    assert!(text.contains('7') && text.contains('1'), "{text}");
    assert!(server.join().unwrap().is_err());
}

#[test]
fn zero_client_for_100_ticks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zero.sdlg");
    let (addr, server) = server(settings(out.clone(), 100));
    let mut client = ClientSession::connect(addr.as_str()).unwrap();
    assert_eq!(client.version(), 1);
    assert_eq!(client.run(BuiltinAgent::new(Policy::Zero, 0)).unwrap(), 100);
    assert_eq!(client.tick(), Some(99));
    let log = server.join().unwrap().unwrap();
    assert_eq!(log.records.len(), 100);
    assert_eq!(log.records.last().unwrap().tick, 99);
    assert_eq!(log.status, LogStatus::Complete);
    assert_eq!(read_log(&out).unwrap(), log);
    let zero = encode_action(&Action::zero());
    assert!(log.records.iter().all(|r| r.action == zero));
}

#[test]
fn disconnect_at_tick_50_leaves_an_aborted_log_of_50() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cut.sdlg");
    let (addr, server) = server(settings(out.clone(), 200));
    let mut client = ClientSession::connect(addr.as_str()).unwrap();
    loop {
        let step = client.next_step().unwrap().unwrap();
        if step.tick == 50 {
            break;
        }
        client.act(&Action::zero()).unwrap();
    }
    drop(client);
    let err = server.join().unwrap().unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let log = read_log(&out).unwrap();
    assert_eq!(log.status, LogStatus::Aborted);
    assert_eq!(log.records.len(), 50);
    let report = replay_log(&log).unwrap();
    assert_eq!((report.verified, report.divergence), (50, None));
}

#[test]
fn silent_agent_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("slow.sdlg");
    let mut s = settings(out.clone(), 10);
    s.timeout = Duration::from_millis(300);
    let (addr, server) = server(s);
    let mut client = ClientSession::connect(addr.as_str()).unwrap();
    client.next_step().unwrap().unwrap();
    client.act(&Action::zero()).unwrap();
    client.next_step().unwrap().unwrap();
    let err = server.join().unwrap().unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("timed out"), "{err}");
    match client.next_step() {
        Err(SessionError::Peer { code, .. }) => assert_eq!(code, Some(ErrorCode::Timeout)),
        other => panic!("{other:?}"),
    }
    let log = read_log(&out).unwrap();
    assert_eq!((log.status, log.records.len()), (LogStatus::Aborted, 1));
}

#[test]
fn lockstep_frame_order() {
    let dir = tempfile::tempdir().unwrap();
    let (addr, server) = server(settings(dir.path().join("order.sdlg"), 20));
    let mut s = raw(&addr);
    send(&mut s, Frame::new(FrameType::Hello, 0, encode_hello(SUPPORTED_VERSIONS)));
    recv(&mut s);
    for t in 0..20u64 {
        let mut f = recv(&mut s);
        while f.kind == FrameType::Event {
            assert_eq!(f.tick, t);
            f = recv(&mut s);
        }
        assert_eq!((f.kind, f.tick), (FrameType::Obs, t));
        assert_eq!(f.payload.len(), 4332);
        if t == 3 {
            // Nothing more arrives until this tick is answered.
            s.set_read_timeout(Some(Duration::from_millis(150))).unwrap();
            let mut byte = [0u8; 1];
            let e = s.read(&mut byte).unwrap_err();
            assert!(matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut));
            s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        }
        send(&mut s, Frame::new(FrameType::Act, t, encode_action(&Action::zero())));
    }
    let bye = recv(&mut s);
    assert_eq!((bye.kind, bye.tick, bye.payload.as_slice()), (FrameType::Bye, 20, &[0u8][..]));
    assert!(server.join().unwrap().is_ok());
}

#[test]
fn bad_actions_are_rejected_with_codes() {
    let dir = tempfile::tempdir().unwrap();
    let zero = encode_action(&Action::zero());
    let mut nan = zero.clone();
    nan[..4].copy_from_slice(&f32::NAN.to_le_bytes());
    let cases = [
        (Frame::new(FrameType::Act, 0, zero[..223].to_vec()), ErrorCode::PayloadSize, "expected 224"),
        (Frame::new(FrameType::Act, 7, zero.clone()), ErrorCode::UnexpectedFrame, "tick"),
        (Frame::new(FrameType::Reset, 0, Vec::new()), ErrorCode::UnexpectedFrame, "Reset"),
        (Frame::new(FrameType::Act, 0, nan), ErrorCode::InvalidAction, "invalid action"),
    ];
    for (frame, code, text) in cases {
        let out = dir.path().join("bad.sdlg");
        let (addr, server) = server(settings(out.clone(), 5));
        let mut s = raw(&addr);
        send(&mut s, Frame::new(FrameType::Hello, 0, encode_hello(&[1])));
        recv(&mut s);
        let mut f = recv(&mut s);
        while f.kind != FrameType::Obs {
            f = recv(&mut s);
        }
        send(&mut s, frame);
        let reply = recv(&mut s);
        assert_eq!(err_code(&reply), Some(code));
        let message = decode_error(&reply.payload).unwrap().1;
        assert!(message.contains(text), "{message}");
        assert!(server.join().unwrap().is_err());
        assert_eq!(read_log(&out).unwrap().records.len(), 0);
    }
}

/// Every byte the server sends during a whole session.
fn wire_bytes(seed: u64, dir: &std::path::Path) -> Vec<u8> {
    let (addr, server) = server(settings(dir.join(format!("w{seed}.sdlg")), 60));
    let mut s = raw(&addr);
    send(&mut s, Frame::new(FrameType::Hello, 0, encode_hello(&[1])));
    let mut bytes = Vec::new();
    let mut agent = sedro::agents::RandomAgent::new(seed);
    loop {
        let f = recv(&mut s);
        bytes.extend(f.encode());
        match f.kind {
            FrameType::Obs => {
                let obs = sedro_core::protocol::decode_observation(f.tick, &f.payload).unwrap();
                let a = sedro_core::eval::AgentLink::act(&mut agent, &[], &obs).unwrap();
                send(&mut s, Frame::new(FrameType::Act, f.tick, encode_action(&a)));
            }
            FrameType::Bye => break,
            _ => {}
        }
    }
    server.join().unwrap().unwrap();
    bytes
}

#[test]
fn identical_sessions_produce_identical_streams() {
    let dir = tempfile::tempdir().unwrap();
    let a = wire_bytes(5, dir.path());
    assert_eq!(a, wire_bytes(5, dir.path()));
    assert_ne!(a, wire_bytes(6, dir.path()));
}

#[test]
fn replayed_file_matches_and_tampering_is_located() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.sdlg");
    let (addr, server) = server(settings(out.clone(), 80));
    ClientSession::connect(addr.as_str()).unwrap().run(BuiltinAgent::new(Policy::Random, 2)).unwrap();
    server.join().unwrap().unwrap();
    let log = read_log(&out).unwrap();
    assert_eq!(replay_log(&log).unwrap().divergence, None);

    let mut bad = log.clone();
    bad.records[33].obs_digest ^= 1;
    let tampered = dir.path().join("t.sdlg");
    write_log(&tampered, &bad).unwrap();
    let report = replay_log(&read_log(&tampered).unwrap()).unwrap();
    assert_eq!(report.verified, 33);
    assert!(matches!(report.divergence, Some((33, Divergence::Observation { .. }))));
}
