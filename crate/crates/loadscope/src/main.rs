fn main() {
    loadscope::runner::cli_main();
}
