use std::process::ExitCode;

fn main() -> ExitCode {
    // Rust turns SIGPIPE into a print panic by default; restore the normal
    // Unix behavior so `faultcast evaluate | head` dies quietly.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    faultcast::cli::run()
}
